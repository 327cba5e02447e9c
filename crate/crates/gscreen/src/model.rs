//! Regression data, rare/weak calibration, Gram matrices and tuning constants.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("design has {rows} rows but the response has {len} entries")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("need at least 2 samples and 2 predictors, got n = {n}, p = {p}")]
    TooSmall { n: usize, p: usize },
    #[error("noise level must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("column {column} has norm {norm:.6}, outside 1 ± {tol}")]
    ColumnNorm { column: usize, norm: f64, tol: f64 },
    #[error("column {0} has zero norm and cannot be normalized")]
    ZeroColumn(usize),
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Most screening and cleaning passes the iterative wrapper will run.
pub const MAX_ITERATIONS: usize = 5;

/// Default column-norm tolerance for Gaussian random designs.
pub const RANDOM_DESIGN_TOL_NORM: f64 = 0.05;
/// Default column-norm tolerance for deterministic designs.
pub const FIXED_DESIGN_TOL_NORM: f64 = 1e-10;

/// The triple (X, Y, σ) of a linear model `Y = Xβ + σz`.
#[derive(Debug, Clone)]
pub struct DesignData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    sigma: f64,
}

impl DesignData {
    /// Validates dimensions, σ and that every column norm lies in `1 ± tol_norm`.
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        sigma: f64,
        tol_norm: f64,
    ) -> Result<Self, ModelError> {
        let data = Self::unchecked_norms(x, y, sigma)?;
        for (j, col) in data.x.column_iter().enumerate() {
            let norm = col.norm();
            if !((1.0 - tol_norm)..=(1.0 + tol_norm)).contains(&norm) {
                return Err(ModelError::ColumnNorm {
                    column: j,
                    norm,
                    tol: tol_norm,
                });
            }
        }
        Ok(data)
    }

    /// Divides every column by its Euclidean norm before validating.
    pub fn renormalized(
        mut x: DMatrix<f64>,
        y: DVector<f64>,
        sigma: f64,
    ) -> Result<Self, ModelError> {
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(ModelError::ZeroColumn(j));
            }
            col /= norm;
        }
        Self::new(x, y, sigma, FIXED_DESIGN_TOL_NORM)
    }

    fn unchecked_norms(x: DMatrix<f64>, y: DVector<f64>, sigma: f64) -> Result<Self, ModelError> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(ModelError::DimensionMismatch { rows: n, len: y.len() });
        }
        if n < 2 || p < 2 {
            return Err(ModelError::TooSmall { n, p });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ModelError::InvalidSigma(sigma));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("response"));
        }
        Ok(Self { x, y, sigma })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Same design and σ with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self, ModelError> {
        Self::unchecked_norms(self.x.clone(), y, self.sigma)
    }

    /// `X'v` for an n-vector `v`.
    pub fn xt_times(&self, v: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(v)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>, f64) {
        (self.x, self.y, self.sigma)
    }
}

/// Rare/weak calibration: sparsity exponent ϑ, strength exponent r, strength cap a,
/// sample-size exponent κ and problem size p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArwParams {
    pub vartheta: f64,
    pub r: f64,
    /// Upper cap multiplier on signal strength; `f64::INFINITY` leaves strengths uncapped.
    pub a: f64,
    /// `None` for fixed designs where n = p.
    pub kappa: Option<f64>,
    pub p: usize,
}

impl ArwParams {
    pub fn new(vartheta: f64, r: f64, p: usize) -> Result<Self, ModelError> {
        let params = Self {
            vartheta,
            r,
            a: f64::INFINITY,
            kappa: None,
            p,
        };
        params.validate()?;
        Ok(params)
    }

    /// Calibration that reproduces a given minimal strength `tau` at noise level σ.
    pub fn from_tau(vartheta: f64, tau: f64, sigma: f64, p: usize) -> Result<Self, ModelError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ModelError::InvalidSigma(sigma));
        }
        if p < 2 {
            return Err(ModelError::TooSmall { n: 0, p });
        }
        let r = (tau / sigma).powi(2) / (2.0 * (p as f64).ln());
        Self::new(vartheta, r, p)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self, ModelError> {
        self.kappa = Some(kappa);
        self.validate()?;
        Ok(self)
    }

    pub fn with_cap(mut self, a: f64) -> Result<Self, ModelError> {
        self.a = a;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let open_unit = |name, value: f64| {
            if value > 0.0 && value < 1.0 {
                Ok(())
            } else {
                Err(ModelError::OutOfRange {
                    name,
                    value,
                    range: "(0, 1)",
                })
            }
        };
        open_unit("vartheta", self.vartheta)?;
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(ModelError::OutOfRange {
                name: "r",
                value: self.r,
                range: "(0, inf)",
            });
        }
        if self.a.is_nan() || self.a < 1.0 {
            return Err(ModelError::OutOfRange {
                name: "a",
                value: self.a,
                range: "[1, inf]",
            });
        }
        if self.p < 2 {
            return Err(ModelError::TooSmall { n: 0, p: self.p });
        }
        if let Some(kappa) = self.kappa {
            open_unit("kappa", kappa)?;
            if kappa <= 1.0 - self.vartheta {
                return Err(ModelError::OutOfRange {
                    name: "kappa",
                    value: kappa,
                    range: "(1 - vartheta, 1)",
                });
            }
        }
        Ok(())
    }

    pub fn log_p(&self) -> f64 {
        (self.p as f64).ln()
    }

    /// Sample size `round(p^κ)` for random designs; `p` when κ is unset.
    pub fn sample_size(&self) -> usize {
        match self.kappa {
            Some(kappa) => (self.p as f64).powf(kappa).round() as usize,
            None => self.p,
        }
    }
}

/// Signal rate ε_p and minimal strength τ_p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub eps_p: f64,
    pub tau_p: f64,
}

pub fn derive_calibration(params: &ArwParams, sigma: f64) -> Calibration {
    let log_p = params.log_p();
    Calibration {
        eps_p: (-params.vartheta * log_p).exp(),
        tau_p: sigma * (2.0 * params.r * log_p).sqrt(),
    }
}

/// Law of the signal magnitudes |μ_j|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuLaw {
    /// Every magnitude equals `tau`.
    Equal { tau: f64 },
    /// Point mass at `tau` with probability `point_mass`, otherwise `tau·(1 + V/6)` with V ~ χ²₁.
    ChiSquareMixture { tau: f64, point_mass: f64 },
}

impl MuLaw {
    /// Smallest magnitude the law can produce.
    pub fn min_strength(&self) -> f64 {
        match *self {
            Self::Equal { tau } | Self::ChiSquareMixture { tau, .. } => tau,
        }
    }
}

/// A coefficient vector together with its support and the law that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    #[serde(with = "dvector_serde")]
    pub beta: DVector<f64>,
    pub support: Vec<usize>,
    pub mu_law: MuLaw,
}

impl SignalSpec {
    pub fn new(beta: DVector<f64>, mu_law: MuLaw) -> Result<Self, ModelError> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(ModelError::NonFinite("beta"));
        }
        let support = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        Ok(Self {
            beta,
            support,
            mu_law,
        })
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn signal_count(&self) -> usize {
        self.support.len()
    }

    /// Whether every nonzero lies in `[tau, cap·tau]`.
    pub fn within_strength(&self, tau: f64, cap: f64) -> bool {
        self.support.iter().all(|&j| {
            let m = self.beta[j].abs();
            m >= tau && m <= cap * tau
        })
    }
}

/// Number of coordinates where the signs of `estimate` and `truth` differ.
pub fn sign_mismatches(estimate: &DVector<f64>, truth: &DVector<f64>) -> usize {
    assert_eq!(estimate.len(), truth.len(), "vectors differ in length");
    estimate
        .iter()
        .zip(truth.iter())
        .filter(|(a, b)| sign_of(**a) != sign_of(**b))
        .count()
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub(crate) mod dvector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(DVector::from_vec)
    }
}

/// Symmetric p×p Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    /// Wraps a square matrix, symmetrizing it as `(M + M')/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, ModelError> {
        if !m.is_square() {
            return Err(ModelError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("Gram matrix"));
        }
        Ok(Self(symmetrize(m)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Dense principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        principal_submatrix(&self.0, idx)
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

pub fn build_gram(design: &DesignData) -> GramMatrix {
    GramMatrix(symmetrize(design.x().tr_mul(design.x())))
}

/// Gram matrix with off-diagonal entries below δ in magnitude zeroed, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedGram {
    delta: f64,
    /// Per row, `(column, value)` pairs sorted by column, diagonal included.
    rows: Vec<Vec<(usize, f64)>>,
}

impl RegularizedGram {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn p(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Stored value, or 0 when the entry was dropped.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn is_stored(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search_by_key(&j, |&(c, _)| c).is_ok()
    }

    /// Number of stored off-diagonal entries (each unordered pair counted twice).
    pub fn off_diagonal_count(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum::<usize>() - self.rows.len()
    }

    /// Dense principal submatrix of the regularized values on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.get(idx[a], idx[b]))
    }
}

pub fn regularize_gram(gram: &GramMatrix, delta: f64) -> Result<RegularizedGram, ModelError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ModelError::OutOfRange {
            name: "delta",
            value: delta,
            range: "(0, 1)",
        });
    }
    let g = gram.matrix();
    let p = gram.p();
    let rows = (0..p)
        .map(|i| {
            (0..p)
                .filter_map(|j| {
                    let v = g[(i, j)];
                    (i == j || v.abs() >= delta).then_some((j, v))
                })
                .collect()
        })
        .collect();
    Ok(RegularizedGram { delta, rows })
}

/// Default GOSD threshold `1/log p`.
pub fn default_delta(p: usize) -> f64 {
    1.0 / (p as f64).ln()
}

/// How the screening constant q is chosen for each test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum QRule {
    /// Upper endpoint of the admissible q interval.
    Max,
    /// The more conservative closed-form endpoint.
    Conservative,
    /// A constant, still floored at q0.
    Fixed(f64),
}

/// Tuning constants of the screen-and-clean estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    /// Largest candidate subgraph size in the screening pass.
    pub m0: usize,
    /// Threshold defining the graph of strong dependence.
    pub delta: f64,
    pub q_rule: QRule,
    /// Floor applied to every chosen q.
    pub q0: f64,
    /// Scales the branch value of the q rule (1 leaves it unchanged).
    pub q_multiplier: f64,
    /// Per-coordinate L0 penalty level of the cleaning pass.
    pub u_gs: f64,
    /// Minimal nonzero magnitude allowed by the cleaning pass.
    pub v_gs: f64,
    pub max_iterations: usize,
    /// Largest retained component the cleaning pass will search exhaustively.
    pub component_cap: usize,
    /// Abort enumeration beyond this many candidate subgraphs.
    pub subgraph_cap: usize,
    /// Keep the per-test record of the screening pass.
    pub record_trace: bool,
}

impl TuningParams {
    /// Defaults tied to a calibration: `u = σ√(2ϑ log p)`, `v = τ_p`, `δ = 1/log p`.
    pub fn from_arw(params: &ArwParams, sigma: f64) -> Self {
        let log_p = params.log_p();
        Self {
            m0: 3,
            delta: default_delta(params.p),
            q_rule: QRule::Max,
            q0: 0.25,
            q_multiplier: 1.0,
            u_gs: sigma * (2.0 * params.vartheta * log_p).sqrt(),
            v_gs: derive_calibration(params, sigma).tau_p,
            max_iterations: 1,
            component_cap: 20,
            subgraph_cap: 100_000_000,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ModelError::OutOfRange {
                    name,
                    value,
                    range: "(0, inf)",
                })
            }
        };
        if self.m0 == 0 {
            return Err(ModelError::OutOfRange {
                name: "m0",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ModelError::OutOfRange {
                name: "delta",
                value: self.delta,
                range: "(0, 1)",
            });
        }
        positive("q0", self.q0)?;
        positive("q_multiplier", self.q_multiplier)?;
        if let QRule::Fixed(q) = self.q_rule {
            positive("fixed q", q)?;
        }
        positive("u_gs", self.u_gs)?;
        positive("v_gs", self.v_gs)?;
        if !(1..=MAX_ITERATIONS).contains(&self.max_iterations) {
            return Err(ModelError::OutOfRange {
                name: "max_iterations",
                value: self.max_iterations as f64,
                range: "[1, 5]",
            });
        }
        if self.component_cap == 0 || self.component_cap > 30 {
            return Err(ModelError::OutOfRange {
                name: "component_cap",
                value: self.component_cap as f64,
                range: "[1, 30]",
            });
        }
        Ok(())
    }
}

/// Smallest integer at least `max(m0, (ϑ+r)²/(2ϑr))`.
pub fn compute_g(m0: usize, vartheta: f64, r: f64) -> usize {
    let ratio = (vartheta + r).powi(2) / (2.0 * vartheta * r);
    // Guard against ratios that are integers up to rounding, such as ϑ = r.
    let ceil = (ratio - 1e-12).ceil().max(0.0) as usize;
    m0.max(ceil)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_design(x: DMatrix<f64>) -> DesignData {
        let n = x.nrows();
        DesignData::renormalized(x, DVector::zeros(n), 1.0).unwrap()
    }

    #[test]
    fn identity_design_has_identity_gram() {
        let d = DesignData::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0, 1e-12).unwrap();
        assert_eq!(build_gram(&d).matrix(), &DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn duplicated_columns_have_unit_correlation() {
        let col = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let x = DMatrix::from_columns(&[col.clone(), col]);
        let g = build_gram(&unit_design(x));
        assert_abs_diff_eq!(g.get(0, 1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gram_matches_triple_loop() {
        let x = DMatrix::from_fn(10, 5, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + 0.1 * j as f64);
        let d = unit_design(x);
        let g = build_gram(&d);
        for a in 0..5 {
            for b in 0..5 {
                let mut s = 0.0;
                for i in 0..10 {
                    s += d.x()[(i, a)] * d.x()[(i, b)];
                }
                assert_abs_diff_eq!(g.get(a, b), s, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_mismatched_response() {
        let err = DesignData::new(DMatrix::identity(3, 3), DVector::zeros(2), 1.0, 0.1);
        assert!(matches!(err, Err(ModelError::DimensionMismatch { rows: 3, len: 2 })));
    }

    #[test]
    fn rejects_column_norm_outside_tolerance() {
        let err = DesignData::new(DMatrix::identity(3, 3) * 1.2, DVector::zeros(3), 1.0, 0.05);
        assert!(matches!(err, Err(ModelError::ColumnNorm { column: 0, .. })));
    }

    #[test]
    fn identity_keeps_only_diagonal() {
        let g = GramMatrix::from_matrix(DMatrix::identity(4, 4)).unwrap();
        let reg = regularize_gram(&g, 0.1).unwrap();
        assert_eq!(reg.off_diagonal_count(), 0);
        assert_eq!(reg.get(2, 2), 1.0);
    }

    #[test]
    fn strong_block_entries_survive_default_delta() {
        let delta = default_delta(5000);
        assert_abs_diff_eq!(delta, 0.1174, epsilon = 1e-4);
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 0.7;
        m[(1, 0)] = 0.7;
        m[(2, 3)] = -0.7;
        m[(3, 2)] = -0.7;
        m[(0, 2)] = 0.05;
        m[(2, 0)] = 0.05;
        let reg = regularize_gram(&GramMatrix::from_matrix(m).unwrap(), delta).unwrap();
        assert_eq!(reg.get(0, 1), 0.7);
        assert_eq!(reg.get(3, 2), -0.7);
        assert!(!reg.is_stored(0, 2));
        assert_eq!(reg.off_diagonal_count(), 4);
    }

    #[test]
    fn sign_mismatch_counts() {
        let truth = DVector::from_vec(vec![0.0, 2.0, -3.0, 0.0, 1.0]);
        assert_eq!(sign_mismatches(&truth, &truth), 0);
        assert_eq!(sign_mismatches(&DVector::zeros(5), &truth), 3);
        let flipped = DVector::from_vec(vec![0.0, 2.0, 3.0, 0.0, 1.0]);
        assert_eq!(sign_mismatches(&flipped, &truth), 1);
        let spec = SignalSpec::new(truth, MuLaw::Equal { tau: 1.0 }).unwrap();
        assert_eq!(spec.support, vec![1, 2, 4]);
        assert!(spec.within_strength(1.0, 3.0));
        assert!(!spec.within_strength(1.5, 3.0));
    }

    #[test]
    fn calibration_arithmetic() {
        let params = ArwParams::new(0.25, 3.0, 5000).unwrap();
        let cal = derive_calibration(&params, 1.0);
        assert_abs_diff_eq!(cal.eps_p, 5000f64.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(cal.eps_p, 0.11892, epsilon = 1e-5);
        assert_abs_diff_eq!(cal.tau_p, 7.14865, epsilon = 1e-5);
        let tiny = ArwParams::new(1e-9, 3.0, 5000).unwrap();
        assert_abs_diff_eq!(derive_calibration(&tiny, 1.0).eps_p, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn from_tau_inverts_tau() {
        let params = ArwParams::from_tau(0.35, 8.0, 1.0, 2000).unwrap();
        assert_abs_diff_eq!(derive_calibration(&params, 1.0).tau_p, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_must_exceed_one_minus_vartheta() {
        let base = ArwParams::new(0.35, 3.0, 2000).unwrap();
        assert!(base.with_kappa(0.975).is_ok());
        assert!(base.with_kappa(0.6).is_err());
        assert_eq!(base.with_kappa(0.975).unwrap().sample_size(), 1654);
    }

    #[test]
    fn g_values() {
        assert_eq!(compute_g(3, 0.35, 3.0), 6);
        assert_eq!(compute_g(10, 0.5, 0.5), 10);
        assert_eq!(compute_g(1, 0.4, 0.4), 2);
    }

    #[test]
    fn default_tuning_is_valid_and_ordered() {
        let params = ArwParams::new(0.35, 3.0, 2000).unwrap();
        let t = TuningParams::from_arw(&params, 1.0);
        t.validate().unwrap();
        assert!(t.u_gs <= t.v_gs);
    }

    fn arb_symmetric(p: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-1.0f64..1.0, p * p).prop_map(move |v| {
            let m = DMatrix::from_vec(p, p, v);
            let mut s = (&m + m.transpose()) * 0.5;
            s.fill_diagonal(1.0);
            s
        })
    }

    proptest! {
        #[test]
        fn regularized_pattern_is_symmetric(m in arb_symmetric(7), delta in 0.01f64..0.99) {
            let reg = regularize_gram(&GramMatrix::from_matrix(m).unwrap(), delta).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    prop_assert_eq!(reg.is_stored(i, j), reg.is_stored(j, i));
                    prop_assert_eq!(reg.get(i, j), reg.get(j, i));
                    if i != j && reg.is_stored(i, j) {
                        prop_assert!(reg.get(i, j).abs() >= delta);
                    }
                }
            }
        }

        #[test]
        fn larger_delta_gives_subpattern(m in arb_symmetric(6), d1 in 0.01f64..0.5, gap in 0.0f64..0.49) {
            let g = GramMatrix::from_matrix(m).unwrap();
            let loose = regularize_gram(&g, d1).unwrap();
            let tight = regularize_gram(&g, d1 + gap).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    if tight.is_stored(i, j) {
                        prop_assert!(loose.is_stored(i, j));
                    }
                }
            }
        }

        #[test]
        fn expected_signal_count_is_eps_times_p(vartheta in 0.05f64..0.95, p in 2usize..100_000) {
            let params = ArwParams::new(vartheta, 2.0, p).unwrap();
            let cal = derive_calibration(&params, 1.0);
            let expected = (p as f64).powf(1.0 - vartheta);
            prop_assert!((cal.eps_p * p as f64 - expected).abs() <= 1e-9 * expected);
        }

        #[test]
        fn g_is_smallest_admissible_integer(m0 in 1usize..8, vartheta in 0.05f64..0.95, r in 0.1f64..12.0) {
            let g = compute_g(m0, vartheta, r);
            let ratio = (vartheta + r).powi(2) / (2.0 * vartheta * r);
            prop_assert!(g as f64 >= ratio - 1e-9 && g >= m0);
            prop_assert!(g == m0 || ((g - 1) as f64) < ratio);
        }
    }
}
