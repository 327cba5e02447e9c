//! Comparison estimators: the lasso path by coordinate descent, with oracle (best-Hamming)
//! tuning, and univariate screening.

use std::ops::ControlFlow;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::model::{build_gram, sign_mismatches, DesignData, GramMatrix, SignalSpec};
pub use crate::selector::ups;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const DEFAULT_GRID_LEN: usize = 100;
/// Smallest λ of the default grid as a fraction of λ_max.
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("lambda grid must be non-empty, positive and strictly decreasing")]
    InvalidGrid,
    #[error("truth has {truth} coordinates but the design has {design}")]
    SizeMismatch { truth: usize, design: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitStatus {
    pub sweeps: usize,
    pub converged: bool,
    /// Largest KKT violation at the returned coefficients.
    pub kkt_residual: f64,
}

/// Lasso solutions along a decreasing λ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<DVector<f64>>,
    pub supports: Vec<Vec<usize>>,
    pub status: Vec<FitStatus>,
}

impl LassoPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.status.iter().all(|s| s.converged)
    }
}

pub fn lambda_max(xty: &DVector<f64>) -> f64 {
    xty.amax()
}

/// `len` log-spaced values from `lambda_max` down to `ratio·lambda_max`.
pub fn log_grid(lambda_max: f64, len: usize, ratio: f64) -> Vec<f64> {
    if len == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (len - 1) as f64;
    (0..len).map(|i| lambda_max * (step * i as f64).exp()).collect()
}

pub fn default_lambda_grid(design: &DesignData) -> Vec<f64> {
    let lmax = lambda_max(&design.xt_times(design.y()));
    log_grid(lmax, DEFAULT_GRID_LEN, DEFAULT_GRID_RATIO)
}

fn check_grid(grid: &[f64]) -> Result<(), BaselineError> {
    let positive = grid.iter().all(|&l| l.is_finite() && l > 0.0);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if grid.is_empty() || !positive || !decreasing {
        return Err(BaselineError::InvalidGrid);
    }
    Ok(())
}

fn soft(z: f64, lambda: f64) -> f64 {
    z.signum() * (z.abs() - lambda).max(0.0)
}

/// `½‖Y − Xβ‖² + λ‖β‖₁`.
pub fn lasso_objective(design: &DesignData, beta: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * (design.y() - design.x() * beta).norm_squared() + lambda * beta.lp_norm(1)
}

/// Largest violation of the lasso optimality conditions, from `X'Y` and the Gram matrix.
pub fn kkt_residual(gram: &GramMatrix, xty: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let corr = gradient(gram, xty, beta);
    (0..beta.len())
        .map(|j| {
            if beta[j] == 0.0 {
                (corr[j].abs() - lambda).max(0.0)
            } else {
                (corr[j] - lambda * beta[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `X'(Y − Xβ)` computed from the nonzero coordinates only.
fn gradient(gram: &GramMatrix, xty: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let g = gram.matrix();
    let mut corr = xty.clone();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            corr.axpy(-b, &g.column(j), 1.0);
        }
    }
    corr
}

/// Coordinate descent state at one λ; `corr` tracks `X'(Y − Xβ)`.
struct Solver<'a> {
    gram: &'a GramMatrix,
    xty: &'a DVector<f64>,
    beta: DVector<f64>,
    corr: DVector<f64>,
}

impl Solver<'_> {
    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let g = self.gram.matrix();
        let gjj = g[(j, j)];
        let old = self.beta[j];
        let new = soft(self.corr[j] + gjj * old, lambda) / gjj;
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            self.corr.axpy(-delta, &g.column(j), 1.0);
        }
        delta.abs()
    }

    fn sweep(&mut self, coords: impl Iterator<Item = usize>, lambda: f64) -> f64 {
        coords.map(|j| self.update(j, lambda)).fold(0.0, f64::max)
    }

    /// Full sweeps alternate with sweeps over the active set until a full sweep moves no
    /// coefficient by `tol` and the refreshed gradient satisfies the KKT conditions within `tol`.
    fn solve(&mut self, lambda: f64, tol: f64, max_sweeps: usize) -> FitStatus {
        let p = self.beta.len();
        let mut sweeps = 0;
        loop {
            let change = self.sweep(0..p, lambda);
            sweeps += 1;
            if change < tol {
                self.corr = gradient(self.gram, self.xty, &self.beta);
                let kkt = kkt_residual(self.gram, self.xty, &self.beta, lambda);
                if kkt <= tol {
                    return FitStatus {
                        sweeps,
                        converged: true,
                        kkt_residual: kkt,
                    };
                }
            }
            if sweeps >= max_sweeps {
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| self.beta[j] != 0.0).collect();
            while sweeps < max_sweeps {
                let change = self.sweep(active.iter().copied(), lambda);
                sweeps += 1;
                if change < tol {
                    break;
                }
            }
            if sweeps >= max_sweeps {
                break;
            }
        }
        let kkt = kkt_residual(self.gram, self.xty, &self.beta, lambda);
        log::warn!("lasso did not converge at lambda = {lambda:.4e} after {sweeps} sweeps");
        FitStatus {
            sweeps,
            converged: false,
            kkt_residual: kkt,
        }
    }
}

/// Walks the grid with warm starts, handing each solution to `visit`; stops early on `Break`.
pub fn lasso_path_visit(
    gram: &GramMatrix,
    xty: &DVector<f64>,
    grid: &[f64],
    tol: f64,
    max_sweeps: usize,
    mut visit: impl FnMut(f64, &DVector<f64>, FitStatus) -> ControlFlow<()>,
) -> Result<(), BaselineError> {
    check_grid(grid)?;
    let p = xty.len();
    let mut solver = Solver {
        gram,
        xty,
        beta: DVector::zeros(p),
        corr: xty.clone(),
    };
    for &lambda in grid {
        let status = solver.solve(lambda, tol, max_sweeps);
        if visit(lambda, &solver.beta, status).is_break() {
            break;
        }
    }
    Ok(())
}

/// Lasso path from a precomputed Gram matrix and `X'Y`.
pub fn lasso_path_gram(
    gram: &GramMatrix,
    xty: &DVector<f64>,
    grid: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoPath, BaselineError> {
    let mut path = LassoPath {
        lambdas: Vec::with_capacity(grid.len()),
        coefficients: Vec::with_capacity(grid.len()),
        supports: Vec::with_capacity(grid.len()),
        status: Vec::with_capacity(grid.len()),
    };
    lasso_path_visit(gram, xty, grid, tol, max_sweeps, |lambda, beta, status| {
        path.lambdas.push(lambda);
        path.supports.push((0..beta.len()).filter(|&j| beta[j] != 0.0).collect());
        path.coefficients.push(beta.clone());
        path.status.push(status);
        ControlFlow::Continue(())
    })?;
    Ok(path)
}

/// Cyclic coordinate descent with warm starts down a decreasing grid.
pub fn lasso_cd(
    design: &DesignData,
    lambda_grid: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoPath, BaselineError> {
    let gram = build_gram(design);
    lasso_path_gram(&gram, &design.xt_times(design.y()), lambda_grid, tol, max_sweeps)
}

/// Smallest sign-Hamming error over the grid and the largest λ attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestHamming {
    pub hamming: usize,
    pub lambda: f64,
    /// Grid points actually fitted.
    pub fitted: usize,
}

/// Oracle-tuned lasso from a precomputed Gram matrix.
///
/// The walk stops once more than `|S| + best` coordinates are active at two consecutive grid
/// points: each of them then costs at least one false positive, so smaller λ cannot improve
/// unless the support shrinks again.
pub fn lasso_best_hamming_gram(
    gram: &GramMatrix,
    xty: &DVector<f64>,
    truth: &SignalSpec,
    grid: &[f64],
) -> Result<BestHamming, BaselineError> {
    if truth.p() != xty.len() {
        return Err(BaselineError::SizeMismatch {
            truth: truth.p(),
            design: xty.len(),
        });
    }
    let signals = truth.signal_count();
    let mut best = BestHamming {
        hamming: usize::MAX,
        lambda: grid.first().copied().unwrap_or(f64::NAN),
        fitted: 0,
    };
    let mut over = 0;
    lasso_path_visit(gram, xty, grid, DEFAULT_TOL, DEFAULT_MAX_SWEEPS, |lambda, beta, _| {
        best.fitted += 1;
        let h = sign_mismatches(beta, &truth.beta);
        if h < best.hamming {
            best.hamming = h;
            best.lambda = lambda;
        }
        let active = beta.iter().filter(|&&b| b != 0.0).count();
        over = if active > signals + best.hamming { over + 1 } else { 0 };
        if over >= 2 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(best)
}

pub fn lasso_best_hamming(
    design: &DesignData,
    truth: &SignalSpec,
    lambda_grid: &[f64],
) -> Result<BestHamming, BaselineError> {
    let gram = build_gram(design);
    lasso_best_hamming_gram(&gram, &design.xt_times(design.y()), truth, lambda_grid)
}
