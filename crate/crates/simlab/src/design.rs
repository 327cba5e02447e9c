//! Design matrices: Gaussian random rows with covariance Ω/n, or the fixed square root of Ω.

use gscreen::graphs::{components_of, Gosd};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    /// Rows iid N(0, Ω/n).
    Random,
    /// n = p and X = Ω^{1/2}.
    Fixed,
}

/// Lower Cholesky factor of Ω stored by rows, zeros dropped.
#[derive(Debug, Clone)]
pub struct CholeskyRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl CholeskyRows {
    pub fn new(omega: &DMatrix<f64>) -> Result<Self, SimError> {
        let l = omega
            .clone()
            .cholesky()
            .ok_or(SimError::NotPositiveDefinite("design correlation"))?
            .unpack();
        let p = l.nrows();
        let rows = (0..p)
            .map(|j| (0..=j).filter(|&k| l[(j, k)] != 0.0).map(|k| (k, l[(j, k)])).collect())
            .collect();
        Ok(Self { rows })
    }

    pub fn p(&self) -> usize {
        self.rows.len()
    }

    /// n×p matrix whose rows are iid N(0, Ω/n).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.p();
        let z = DMatrix::<f64>::from_fn(n, p, |_, _| rng.sample(StandardNormal));
        let scale = 1.0 / (n as f64).sqrt();
        let mut x = DMatrix::zeros(n, p);
        for (j, row) in self.rows.iter().enumerate() {
            let mut col = x.column_mut(j);
            for &(k, v) in row {
                col.axpy(v * scale, &z.column(k), 1.0);
            }
        }
        x
    }
}

/// Symmetric PSD square root of Ω, computed separately on each connected block of its
/// nonzero pattern.
pub fn symmetric_sqrt(omega: &DMatrix<f64>) -> Result<DMatrix<f64>, SimError> {
    let p = omega.nrows();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if omega[(i, j)] != 0.0 || omega[(j, i)] != 0.0 {
                edges.push((i, j));
            }
        }
    }
    let graph = Gosd::from_edges(p, &edges)?;
    let all: Vec<usize> = (0..p).collect();
    let mut root = DMatrix::zeros(p, p);
    for block in components_of(&graph, &all)? {
        let m = block.len();
        let sub = DMatrix::from_fn(m, m, |a, b| omega[(block[a], block[b])]);
        let eig = sub.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(SimError::NotPositiveDefinite("design correlation"));
        }
        let sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        for a in 0..m {
            for b in 0..m {
                root[(block[a], block[b])] = 0.5 * (sqrt[(a, b)] + sqrt[(b, a)]);
            }
        }
    }
    Ok(root)
}

/// One design draw; `n` is ignored in fixed mode, where n = p.
pub fn gen_design<R: Rng + ?Sized>(
    mode: DesignMode,
    omega: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>, SimError> {
    match mode {
        DesignMode::Random => Ok(CholeskyRows::new(omega)?.sample(n, rng)),
        DesignMode::Fixed => symmetric_sqrt(omega),
    }
}

/// Column-norm tolerance for random designs: the default 0.05, widened to six standard
/// deviations of a χ_n/√n column norm so that a correctly drawn design is never rejected.
pub fn random_design_tol(n: usize) -> f64 {
    gscreen::model::RANDOM_DESIGN_TOL_NORM.max(6.0 / (2.0 * n as f64).sqrt())
}
