//! Rate exponents: the constrained quadratic minimum ω, per-configuration and per-coordinate
//! exponents, sparse eigenvalue bounds, closed forms for the two-by-two block design,
//! phase boundaries and the sufficient conditions on the correlation matrix.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::graphs::{enumerate_connected_subgraphs, GraphError, Gosd};
use crate::model::principal_submatrix;

/// Largest dimension the exact ω solver accepts.
pub const OMEGA_MAX_DIM: usize = 8;
/// Largest matrix `lambda_k_star` scans exhaustively without a graph restriction.
pub const LAMBDA_BRUTE_FORCE_MAX_DIM: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("exact constrained minimum supports at most {OMEGA_MAX_DIM} coordinates, got {0}")]
    TooManyCoordinates(usize),
    #[error("index sets must be disjoint, in range and D must be non-empty")]
    InvalidIndexSets,
    #[error("principal block on F is singular")]
    SingularBlock,
    #[error("exhaustive scan limited to dimension {LAMBDA_BRUTE_FORCE_MAX_DIM}, got {0}; pass a graph restriction")]
    DimensionTooLarge(usize),
    #[error("submatrix order {k} outside 1..={dim}")]
    InvalidOrder { k: usize, dim: usize },
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("no crossing of the exponent level 1 for vartheta = {vartheta} with r in ({vartheta}, {r_max}]")]
    NoRoot { vartheta: f64, r_max: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Minimum of `ξ'Mξ` over `min_i |ξ_i| ≥ 1` with a minimizing ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMin {
    pub value: f64,
    pub witness: DVector<f64>,
}

/// Exact minimum of `ξ'Mξ` subject to `|ξ_i| ≥ 1` for all i.
///
/// Within a sign orthant the problem is a convex quadratic program whose minimizer fixes some
/// coordinates at ±1 and solves the reduced normal equations for the rest. Every feasible
/// candidate of that form is a feasible point, so the smallest of them is the global minimum.
pub fn omega_min(m: &DMatrix<f64>) -> Result<OmegaMin, ExponentError> {
    let k = m.nrows();
    if !m.is_square() || k == 0 {
        return Err(ExponentError::InvalidIndexSets);
    }
    if k > OMEGA_MAX_DIM {
        return Err(ExponentError::TooManyCoordinates(k));
    }
    if Cholesky::new(m.clone()).is_none() {
        return Err(ExponentError::NotPositiveDefinite);
    }
    let mut best = OmegaMin {
        value: f64::INFINITY,
        witness: DVector::zeros(k),
    };
    let mut xi = DVector::zeros(k);
    // ξ and −ξ share a value, so the first sign can be fixed to +1.
    for signs in 0u32..(1 << (k - 1)) {
        let sign = |i: usize| if i > 0 && signs & (1 << (i - 1)) != 0 { -1.0 } else { 1.0 };
        for fixed in 1u32..(1 << k) {
            let free: Vec<usize> = (0..k).filter(|&i| fixed & (1 << i) == 0).collect();
            for i in 0..k {
                xi[i] = if fixed & (1 << i) != 0 { sign(i) } else { 0.0 };
            }
            if !free.is_empty() {
                let mff = principal_submatrix(m, &free);
                let rhs = DVector::from_iterator(
                    free.len(),
                    free.iter().map(|&a| -(0..k).map(|b| m[(a, b)] * xi[b]).sum::<f64>()),
                );
                let Some(chol) = Cholesky::new(mff) else {
                    continue;
                };
                let sol = chol.solve(&rhs);
                if free
                    .iter()
                    .zip(sol.iter())
                    .any(|(&i, &v)| sign(i) * v < 1.0 - 1e-12)
                {
                    continue;
                }
                for (&i, &v) in free.iter().zip(sol.iter()) {
                    xi[i] = v;
                }
            }
            let value = xi.dot(&(m * &xi));
            if value < best.value {
                best = OmegaMin {
                    value,
                    witness: xi.clone(),
                };
            }
        }
    }
    Ok(best)
}

fn check_index_sets(dim: usize, d: &[usize], f: &[usize]) -> Result<(), ExponentError> {
    let mut all: Vec<usize> = d.iter().chain(f).copied().collect();
    let total = all.len();
    all.sort_unstable();
    all.dedup();
    if d.is_empty() || all.len() != total || all.iter().any(|&i| i >= dim) {
        return Err(ExponentError::InvalidIndexSets);
    }
    Ok(())
}

/// `M_DD − M_DF M_FF⁻¹ M_FD`; returns `M_DD` when F is empty.
pub fn schur_complement(
    m: &DMatrix<f64>,
    d: &[usize],
    f: &[usize],
) -> Result<DMatrix<f64>, ExponentError> {
    check_index_sets(m.nrows(), d, f)?;
    let mdd = principal_submatrix(m, d);
    if f.is_empty() {
        return Ok(mdd);
    }
    let mff = principal_submatrix(m, f);
    let mfd = DMatrix::from_fn(f.len(), d.len(), |a, b| m[(f[a], d[b])]);
    let chol = Cholesky::new(mff).ok_or(ExponentError::SingularBlock)?;
    let solved = chol.solve(&mfd);
    let out = mdd - mfd.transpose() * solved;
    Ok((&out + out.transpose()) * 0.5)
}

/// ω(D, F): the constrained minimum on the Schur complement of F in D ∪ F.
pub fn omega_df(m: &DMatrix<f64>, d: &[usize], f: &[usize]) -> Result<f64, ExponentError> {
    Ok(omega_min(&schur_complement(m, d, f)?)?.value)
}

/// Exponent of a configuration with `d_size` differing and `f_size` shared coordinates.
pub fn rho_from_omega(vartheta: f64, r: f64, omega: f64, d_size: usize, f_size: usize) -> f64 {
    let base = (d_size + 2 * f_size) as f64 * vartheta / 2.0;
    let wr = omega * r;
    if d_size % 2 == 0 {
        base + wr / 4.0
    } else {
        let gap = (wr.sqrt() - vartheta / wr.sqrt()).max(0.0);
        base + vartheta / 2.0 + gap * gap / 4.0
    }
}

pub fn rho_df(
    vartheta: f64,
    r: f64,
    m: &DMatrix<f64>,
    d: &[usize],
    f: &[usize],
) -> Result<f64, ExponentError> {
    let omega = omega_df(m, d, f)?;
    Ok(rho_from_omega(vartheta, r, omega, d.len(), f.len()))
}

/// Per-coordinate exponent with the minimizing configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoStar {
    pub value: f64,
    pub d: Vec<usize>,
    pub f: Vec<usize>,
    /// Number of connected sets containing the coordinate that were searched.
    pub sets_searched: usize,
}

/// Minimum of `rho_df` over configurations whose union is a connected set of the graph
/// containing `j` with at most `g` vertices.
pub fn rho_star_j(
    vartheta: f64,
    r: f64,
    m: &DMatrix<f64>,
    gosd: &Gosd,
    j: usize,
    g: usize,
) -> Result<RhoStar, ExponentError> {
    if j >= gosd.p() || m.nrows() != gosd.p() || g == 0 {
        return Err(ExponentError::InvalidIndexSets);
    }
    let sets = connected_sets_containing(gosd, j, g)?;
    let mut best = RhoStar {
        value: f64::INFINITY,
        d: Vec::new(),
        f: Vec::new(),
        sets_searched: sets.len(),
    };
    for set in &sets {
        let local = principal_submatrix(m, set);
        let size = set.len();
        for d_mask in 1u32..(1 << size) {
            let d: Vec<usize> = (0..size).filter(|&i| d_mask & (1 << i) != 0).collect();
            let f: Vec<usize> = (0..size).filter(|&i| d_mask & (1 << i) == 0).collect();
            let value = rho_df(vartheta, r, &local, &d, &f)?;
            if value < best.value {
                best.value = value;
                best.d = d.iter().map(|&i| set[i]).collect();
                best.f = f.iter().map(|&i| set[i]).collect();
            }
        }
    }
    Ok(best)
}

/// Connected vertex sets of size at most `g` that contain `j`, as global sorted indices.
fn connected_sets_containing(
    gosd: &Gosd,
    j: usize,
    g: usize,
) -> Result<Vec<Vec<usize>>, ExponentError> {
    // Only vertices within distance g − 1 of j can share a connected set of size g with it.
    let mut ball = vec![j];
    let mut dist = std::collections::HashMap::from([(j, 0usize)]);
    let mut head = 0;
    while head < ball.len() {
        let v = ball[head];
        head += 1;
        let dv = dist[&v];
        if dv + 1 >= g {
            continue;
        }
        for &u in gosd.neighbors(v) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(u) {
                e.insert(dv + 1);
                ball.push(u);
            }
        }
    }
    ball.sort_unstable();
    let local_of = |v: usize| ball.binary_search(&v).ok();
    let edges: Vec<(usize, usize)> = ball
        .iter()
        .enumerate()
        .flat_map(|(a, &v)| {
            gosd.neighbors(v)
                .iter()
                .filter_map(move |&u| local_of(u).map(|b| (a, b)))
                .collect::<Vec<_>>()
        })
        .collect();
    let local = Gosd::from_edges(ball.len(), &edges)?;
    let local_j = local_of(j).expect("seed is in its own ball");
    let list = enumerate_connected_subgraphs(&local, g.min(ball.len()), usize::MAX)?;
    Ok(list
        .iter()
        .filter(|s| s.contains(&local_j))
        .map(|s| s.iter().map(|&a| ball[a]).collect())
        .collect())
}

/// Smallest eigenvalue over k×k principal submatrices, optionally only over connected
/// index sets of `restrict`.
pub fn lambda_k_star(
    m: &DMatrix<f64>,
    k: usize,
    restrict: Option<&Gosd>,
) -> Result<f64, ExponentError> {
    let dim = m.nrows();
    if k == 0 || k > dim {
        return Err(ExponentError::InvalidOrder { k, dim });
    }
    let min_eig = |idx: &[usize]| -> f64 {
        let sub = principal_submatrix(m, idx);
        SymmetricEigen::new(sub).eigenvalues.min()
    };
    let mut best = f64::INFINITY;
    match restrict {
        Some(graph) => {
            if graph.p() != dim {
                return Err(ExponentError::InvalidIndexSets);
            }
            for set in enumerate_connected_subgraphs(graph, k, usize::MAX)?.iter() {
                if set.len() == k {
                    best = best.min(min_eig(set));
                }
            }
        }
        None => {
            if dim > LAMBDA_BRUTE_FORCE_MAX_DIM {
                return Err(ExponentError::DimensionTooLarge(dim));
            }
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                best = best.min(min_eig(&idx));
                // Advance to the next k-combination in lexicographic order.
                let Some(pos) = (0..k).rev().find(|&i| idx[i] < dim - k + i) else {
                    break;
                };
                idx[pos] += 1;
                for i in (pos + 1)..k {
                    idx[i] = idx[i - 1] + 1;
                }
            }
        }
    }
    Ok(best)
}

/// Which estimator an exponent refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentMethod {
    Gs,
    Ss,
    Lasso,
    Universal,
}

impl ExponentMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gs => "gs",
            Self::Ss => "ss",
            Self::Lasso => "lasso",
            Self::Universal => "universal",
        }
    }
}

/// Exponent value with the name of the term attaining the minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub method: ExponentMethod,
    pub vartheta: f64,
    pub r: f64,
    pub h0: f64,
    pub value: f64,
    pub branch: &'static str,
}

fn argmin_term(terms: &[(&'static str, f64)]) -> (&'static str, f64) {
    terms
        .iter()
        .copied()
        .fold(("", f64::INFINITY), |acc, t| if t.1 < acc.1 { t } else { acc })
}

fn check_block_inputs(vartheta: f64, r: f64, h0: f64) -> Result<(), ExponentError> {
    if !(vartheta > 0.0 && vartheta < 1.0) {
        return Err(ExponentError::OutOfRange {
            name: "vartheta",
            value: vartheta,
            range: "(0, 1)",
        });
    }
    if !(r.is_finite() && r > vartheta) {
        return Err(ExponentError::OutOfRange {
            name: "r",
            value: r,
            range: "(vartheta, inf)",
        });
    }
    if !(h0.abs() < 1.0) {
        return Err(ExponentError::OutOfRange {
            name: "h0",
            value: h0,
            range: "(-1, 1)",
        });
    }
    Ok(())
}

fn single_term(vartheta: f64, r: f64) -> f64 {
    (vartheta + r).powi(2) / (4.0 * r)
}

/// Graphlet screening exponent on the block design with off-diagonal `h0`.
pub fn rho_gs_block(vartheta: f64, r: f64, h0: f64) -> Result<ExponentReport, ExponentError> {
    check_block_inputs(vartheta, r, h0)?;
    let h = h0.abs();
    let s = (1.0 - h * h) * r;
    let (branch, value) = argmin_term(&[
        ("single", single_term(vartheta, r)),
        ("pair_joint", vartheta + (1.0 - h) * r / 2.0),
        ("pair_given_partner", 2.0 * vartheta + (s - vartheta).max(0.0).powi(2) / (4.0 * s)),
    ]);
    Ok(ExponentReport {
        method: ExponentMethod::Gs,
        vartheta,
        r,
        h0,
        value,
        branch,
    })
}

/// Subset selection exponent on the block design.
pub fn rho_ss_block(vartheta: f64, r: f64, h0: f64) -> Result<ExponentReport, ExponentError> {
    check_block_inputs(vartheta, r, h0)?;
    let h = h0.abs();
    let ratio = r / vartheta;
    let ss1 = if ratio <= 2.0 / (1.0 - h * h) {
        2.0 * vartheta
    } else {
        let s = (1.0 - h * h) * r;
        (2.0 * vartheta + s).powi(2) / (4.0 * s)
    };
    let ss2 = if ratio <= 2.0 / (1.0 - h) {
        2.0 * vartheta
    } else {
        let t = (1.0 - h) * r;
        2.0 * ((2.0 * t).sqrt() - (t - vartheta).sqrt()).powi(2)
    };
    let (branch, value) = argmin_term(&[
        ("single", single_term(vartheta, r)),
        ("pair_joint", vartheta + (1.0 - h) * r / 2.0),
        ("ss_partner_same_sign", ss1),
        ("ss_partner_opposite", ss2),
    ]);
    Ok(ExponentReport {
        method: ExponentMethod::Ss,
        vartheta,
        r,
        h0,
        value,
        branch,
    })
}

/// Lasso exponent on the block design with ideal tuning.
pub fn rho_lasso_block(vartheta: f64, r: f64, h0: f64) -> Result<ExponentReport, ExponentError> {
    check_block_inputs(vartheta, r, h0)?;
    let h = h0.abs();
    let ratio = r / vartheta;
    let tiny = h < 1e-8;
    let l1 = if ratio <= 2.0 / (1.0 - h).powi(2) {
        2.0 * vartheta
    } else if tiny {
        (r + 2.0 * vartheta).powi(2) / (4.0 * r)
    } else {
        let inner = (1.0 - h * h) * (1.0 - h).powi(2) * r - 4.0 * h * (1.0 - h) * vartheta;
        (((1.0 - h * h) * r.sqrt() - inner.max(0.0).sqrt()) / (2.0 * h)).powi(2)
    };
    let l2 = if ratio <= (1.0 + h) / (1.0 - h).powi(3) {
        2.0 * vartheta
    } else if tiny {
        vartheta + single_term(vartheta, r)
    } else {
        let inner = (1.0 - h).powi(2) * r - 4.0 * h * vartheta / (1.0 - h * h);
        let bracket = (1.0 + h) * r.sqrt() - inner.max(0.0).sqrt();
        vartheta + (1.0 - h).powi(3) * (1.0 + h) / (16.0 * h * h) * bracket * bracket
    };
    let (branch, value) = argmin_term(&[
        ("single", single_term(vartheta, r)),
        (
            "pair_joint",
            vartheta + (1.0 - h) * r / (2.0 * (1.0 + (1.0 - h * h).sqrt())),
        ),
        ("lasso_partner_same_sign", l1),
        ("lasso_partner_opposite", l2),
    ]);
    Ok(ExponentReport {
        method: ExponentMethod::Lasso,
        vartheta,
        r,
        h0,
        value,
        branch,
    })
}

pub fn rho_block(
    method: ExponentMethod,
    vartheta: f64,
    r: f64,
    h0: f64,
) -> Result<ExponentReport, ExponentError> {
    match method {
        ExponentMethod::Gs => rho_gs_block(vartheta, r, h0),
        ExponentMethod::Ss => rho_ss_block(vartheta, r, h0),
        ExponentMethod::Lasso => rho_lasso_block(vartheta, r, h0),
        ExponentMethod::Universal => {
            let u = universal_exponent(vartheta, r)?;
            Ok(ExponentReport {
                method,
                vartheta,
                r,
                h0,
                value: u.total,
                branch: if r > vartheta { "single" } else { "no_recovery" },
            })
        }
    }
}

/// Hamming exponents without correlation: per signal and relative to p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniversalExponent {
    /// Exponent of the per-signal error rate; zero when r ≤ ϑ.
    pub per_signal: f64,
    /// Exponent of the expected Hamming error divided by p.
    pub total: f64,
}

pub fn universal_exponent(vartheta: f64, r: f64) -> Result<UniversalExponent, ExponentError> {
    if !(vartheta > 0.0 && vartheta < 1.0) {
        return Err(ExponentError::OutOfRange {
            name: "vartheta",
            value: vartheta,
            range: "(0, 1)",
        });
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(ExponentError::OutOfRange {
            name: "r",
            value: r,
            range: "(0, inf)",
        });
    }
    let per_signal = if r <= vartheta {
        0.0
    } else {
        (r - vartheta).powi(2) / (4.0 * r)
    };
    Ok(UniversalExponent {
        per_signal,
        total: vartheta + per_signal,
    })
}

/// Largest r searched for phase boundaries.
pub const PHASE_R_MAX: f64 = 100.0;

/// How the exponent crosses the level 1 at a reported boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    /// A continuous root: the exponent equals 1 at `r`.
    Root,
    /// The exponent jumps over 1 at `r`.
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub vartheta: f64,
    pub r: f64,
    pub kind: CrossingKind,
}

/// All r in `(ϑ, 100]` where the block exponent crosses 1, for each ϑ in the grid.
pub fn phase_boundary(
    method: ExponentMethod,
    h0: f64,
    vartheta_grid: &[f64],
) -> Result<Vec<BoundaryPoint>, ExponentError> {
    const SCAN_POINTS: usize = 4000;
    let mut out = Vec::new();
    for &vartheta in vartheta_grid {
        let f = |r: f64| -> Result<f64, ExponentError> {
            Ok(rho_block(method, vartheta, r, h0)?.value - 1.0)
        };
        let lo = vartheta * (1.0 + 1e-9);
        let ratio = (PHASE_R_MAX / lo).ln();
        let grid: Vec<f64> = (0..=SCAN_POINTS)
            .map(|i| lo * (ratio * i as f64 / SCAN_POINTS as f64).exp())
            .collect();
        let mut found = 0;
        let mut prev = (grid[0], f(grid[0])?);
        for &r in &grid[1..] {
            let cur = (r, f(r)?);
            if prev.1 == 0.0 {
                out.push(BoundaryPoint {
                    vartheta,
                    r: prev.0,
                    kind: CrossingKind::Root,
                });
                found += 1;
            } else if prev.1.signum() != cur.1.signum() && cur.1 != 0.0 {
                let (mut a, mut b) = (prev.0, cur.0);
                let fa_sign = prev.1.signum();
                while b - a > 1e-13 * b {
                    let mid = 0.5 * (a + b);
                    let fm = f(mid)?;
                    if fm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if fm.signum() == fa_sign {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let r_root = 0.5 * (a + b);
                let kind = if f(r_root)?.abs() < 1e-8 {
                    CrossingKind::Root
                } else {
                    CrossingKind::Jump
                };
                out.push(BoundaryPoint {
                    vartheta,
                    r: r_root,
                    kind,
                });
                found += 1;
            }
            prev = cur;
        }
        if found == 0 {
            return Err(ExponentError::NoRoot {
                vartheta,
                r_max: PHASE_R_MAX,
            });
        }
    }
    Ok(out)
}

/// Outcome of one sufficient condition, naming the first inequality that fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub violated: Option<String>,
}

impl ConditionCheck {
    fn from_failures(failures: Vec<String>) -> Self {
        Self {
            holds: failures.is_empty(),
            violated: failures.into_iter().next(),
        }
    }
}

/// Sufficient conditions on the correlation matrix for graphlet screening to be optimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    /// Entrywise bound, valid for `1 < r/ϑ < 3 + 2√2`.
    pub entrywise: ConditionCheck,
    /// Bounds on λ3*, λ4* and entries, valid for `r/ϑ < 5 + 2√6`.
    pub small_eigen: ConditionCheck,
    /// Eigenvalue bounds for general ratio r/ϑ.
    pub general: ConditionCheck,
    /// The integer bracketing `(ϑ/r + r/ϑ)/2`.
    pub n_bracket: usize,
}

fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut best: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                best = best.max(m[(i, j)].abs());
            }
        }
    }
    best
}

pub fn check_corollary_conditions(
    m: &DMatrix<f64>,
    vartheta: f64,
    r: f64,
    restrict: Option<&Gosd>,
) -> Result<CorollaryReport, ExponentError> {
    if !(vartheta > 0.0 && vartheta < 1.0) || !(r > 0.0) {
        return Err(ExponentError::OutOfRange {
            name: "r/vartheta",
            value: r / vartheta,
            range: "vartheta in (0,1), r > 0",
        });
    }
    let dim = m.nrows();
    let ratio = r / vartheta;
    let max_entry = max_off_diagonal(m);
    let mut cache: Vec<Option<f64>> = vec![None; dim + 1];
    let mut lambda = |k: usize| -> Result<Option<f64>, ExponentError> {
        if k > dim {
            return Ok(None);
        }
        if cache[k].is_none() {
            cache[k] = Some(lambda_k_star(m, k, restrict)?);
        }
        Ok(cache[k])
    };

    let mut entrywise = Vec::new();
    if !(ratio > 1.0 && ratio < 3.0 + 2.0 * 2f64.sqrt()) {
        entrywise.push("1 < r/vartheta < 3 + 2*sqrt(2)".to_string());
    }
    let bound2 = 4.0 * 2f64.sqrt() - 5.0;
    if max_entry > bound2 {
        entrywise.push(format!("|Omega(i,j)| <= {bound2:.4} (max {max_entry:.4})"));
    }

    let mut small = Vec::new();
    let s6 = 6f64.sqrt();
    if !(ratio < 5.0 + 2.0 * s6) {
        small.push("r/vartheta < 5 + 2*sqrt(6)".to_string());
    }
    for (k, bound) in [(3, 2.0 * (5.0 - 2.0 * s6)), (4, 5.0 - 2.0 * s6)] {
        if let Some(l) = lambda(k)? {
            if l < bound {
                small.push(format!("lambda_{k}* >= {bound:.4} (got {l:.4})"));
            }
        }
    }
    let bound3 = 8.0 * s6 - 19.0;
    if max_entry > bound3 {
        small.push(format!("|Omega(i,j)| <= {bound3:.4} (max {max_entry:.4})"));
    }

    let t = (ratio + 1.0 / ratio) / 2.0;
    // 2N − 1 ≤ t < 2N + 1.
    let n_bracket = ((t + 1.0) / 2.0).floor().max(1.0) as usize;
    let mut general = Vec::new();
    for k in 2..=(2 * n_bracket).saturating_sub(1) {
        let lo = k.div_ceil(2).max(1);
        let hi = k.min(n_bracket);
        let mut need = f64::NEG_INFINITY;
        for j in lo..=hi {
            let x = t - 2.0 * j as f64 + 2.0;
            let num = x + (x * x - 1.0).max(0.0).sqrt();
            need = need.max(num / ((2 * k - 2 * j + 1) as f64 * ratio));
        }
        if let Some(l) = lambda(k)? {
            if l < need {
                general.push(format!("odd-size bound lambda_{k}* >= {need:.4} (got {l:.4})"));
            }
        }
    }
    for k in 2..=(2 * n_bracket) {
        let lo = k.div_ceil(2);
        let hi = (k - 1).min(n_bracket);
        let mut need = f64::NEG_INFINITY;
        for j in lo..=hi {
            need = need.max((t + 1.0 - 2.0 * j as f64) / ((k - j) as f64 * ratio));
        }
        if need == f64::NEG_INFINITY {
            continue;
        }
        if let Some(l) = lambda(k)? {
            if l < need {
                general.push(format!("even-size bound lambda_{k}* >= {need:.4} (got {l:.4})"));
            }
        }
    }

    Ok(CorollaryReport {
        entrywise: ConditionCheck::from_failures(entrywise),
        small_eigen: ConditionCheck::from_failures(small),
        general: ConditionCheck::from_failures(general),
        n_bracket,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair(h: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, h, h, 1.0])
    }

    /// Minimum over `([−3,−1] ∪ [1,3])^k`: a grid of the given step on the leading
    /// coordinates, exact box minimization of the convex remainder on the trailing ones.
    fn grid_oracle(m: &DMatrix<f64>, step: f64) -> f64 {
        let k = m.nrows();
        let lead = (k - 1).min(2);
        let count = (2.0 / step).round() as usize;
        let ticks: Vec<f64> = (0..=count)
            .map(|i| 1.0 + step * i as f64)
            .flat_map(|v| [v, -v])
            .collect();
        let mut idx = vec![0usize; lead];
        let mut best = f64::INFINITY;
        loop {
            let fixed: Vec<f64> = idx.iter().map(|&i| ticks[i]).collect();
            for signs in 0..(1 << (k - lead)) {
                let boxes: Vec<(f64, f64)> = (0..k - lead)
                    .map(|t| if signs & (1 << t) != 0 { (-3.0, -1.0) } else { (1.0, 3.0) })
                    .collect();
                best = best.min(box_min(m, &fixed, &boxes));
            }
            let Some(pos) = (0..lead).find(|&i| idx[i] + 1 < ticks.len()) else {
                break;
            };
            idx[pos] += 1;
            for slot in idx.iter_mut().take(pos) {
                *slot = 0;
            }
        }
        best
    }

    /// Exact minimum of the quadratic form with the leading coordinates fixed and one or two
    /// trailing coordinates confined to boxes.
    fn box_min(m: &DMatrix<f64>, fixed: &[f64], boxes: &[(f64, f64)]) -> f64 {
        let lead = fixed.len();
        let eval = |tail: &[f64]| {
            let xi = DVector::from_iterator(m.nrows(), fixed.iter().chain(tail).copied());
            xi.dot(&(m * &xi))
        };
        // Linear coefficient of trailing coordinate t given the fixed part.
        let lin = |t: usize| (0..lead).map(|a| m[(lead + t, a)] * fixed[a]).sum::<f64>();
        let clamp1 = |t: usize, other: Option<(usize, f64)>| {
            let mut b = lin(t);
            if let Some((o, v)) = other {
                b += m[(lead + t, lead + o)] * v;
            }
            (-b / m[(lead + t, lead + t)]).clamp(boxes[t].0, boxes[t].1)
        };
        match boxes.len() {
            1 => eval(&[clamp1(0, None)]),
            2 => {
                let mut best = f64::INFINITY;
                let a = principal_submatrix(m, &[lead, lead + 1]);
                let rhs = DVector::from_vec(vec![-lin(0), -lin(1)]);
                if let Some(sol) = a.lu().solve(&rhs) {
                    if (boxes[0].0..=boxes[0].1).contains(&sol[0])
                        && (boxes[1].0..=boxes[1].1).contains(&sol[1])
                    {
                        best = best.min(eval(&[sol[0], sol[1]]));
                    }
                }
                for x in [boxes[0].0, boxes[0].1] {
                    best = best.min(eval(&[x, clamp1(1, Some((0, x)))]));
                }
                for y in [boxes[1].0, boxes[1].1] {
                    best = best.min(eval(&[clamp1(0, Some((1, y))), y]));
                }
                best
            }
            _ => unreachable!("one or two trailing coordinates"),
        }
    }

    fn random_pd(k: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(k, k) * 0.3;
        let d = DMatrix::from_diagonal(&m.diagonal().map(|v: f64| 1.0 / v.sqrt()));
        &d * m * &d
    }

    #[test]
    fn identity_omega_is_dimension() {
        for k in 1..=5 {
            let res = omega_min(&DMatrix::identity(k, k)).unwrap();
            assert_abs_diff_eq!(res.value, k as f64, epsilon = 1e-12);
            assert!(res.witness.iter().all(|v| v.abs() == 1.0));
        }
    }

    #[test]
    fn pair_omega_closed_form() {
        for h in [-0.9, -0.3, 0.0, 0.4, 0.8] {
            let res = omega_min(&pair(h)).unwrap();
            assert_abs_diff_eq!(res.value, 2.0 * (1.0 - f64::abs(h)), epsilon = 1e-12);
            if h != 0.0 {
                assert_eq!(res.witness[0] * res.witness[1], -h.signum());
            }
            assert_abs_diff_eq!(omega_df(&pair(h), &[0], &[1]).unwrap(), 1.0 - h * h, epsilon = 1e-12);
        }
    }

    #[test]
    fn omega_rejects_bad_input() {
        assert_eq!(omega_min(&pair(1.2)), Err(ExponentError::NotPositiveDefinite));
        assert_eq!(
            omega_min(&DMatrix::identity(9, 9)),
            Err(ExponentError::TooManyCoordinates(9))
        );
    }

    #[test]
    fn omega_matches_grid_oracle() {
        for k in 2..=4 {
            for seed in 0..4 {
                let m = random_pd(k, seed);
                let exact = omega_min(&m).unwrap().value;
                let grid = grid_oracle(&m, 0.01);
                assert!(exact <= grid + 1e-12);
                assert!(grid - exact < 1e-3, "k={k} seed={seed}: {exact} vs {grid}");
            }
        }
    }

    #[test]
    fn schur_matches_inverse_block() {
        let m = random_pd(4, 11);
        let s = schur_complement(&m, &[0, 2], &[1, 3]).unwrap();
        let inv = m.clone().try_inverse().unwrap();
        let block = principal_submatrix(&inv, &[0, 2]).try_inverse().unwrap();
        assert!((s - block).amax() < 1e-12);
        assert_eq!(schur_complement(&m, &[1], &[]).unwrap()[(0, 0)], m[(1, 1)]);
        assert_abs_diff_eq!(schur_complement(&pair(0.6), &[0], &[1]).unwrap()[(0, 0)], 0.64, epsilon = 1e-15);
    }

    #[test]
    fn schur_rejects_overlap_and_singular() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5, 1.0, 1.0]);
        assert_eq!(schur_complement(&m, &[0], &[0]), Err(ExponentError::InvalidIndexSets));
        assert_eq!(schur_complement(&m, &[0], &[1, 2]), Err(ExponentError::SingularBlock));
    }

    #[test]
    fn rho_df_closed_forms() {
        let (vt, r) = (0.35, 3.0);
        let single = rho_df(vt, r, &DMatrix::identity(1, 1), &[0], &[]).unwrap();
        assert_abs_diff_eq!(single, (vt + r).powi(2) / (4.0 * r), epsilon = 1e-12);
        let h: f64 = 0.6;
        let both = rho_df(vt, r, &pair(h), &[0, 1], &[]).unwrap();
        assert_abs_diff_eq!(both, vt + (1.0 - h.abs()) * r / 2.0, epsilon = 1e-12);
        let s = (1.0 - h * h) * r;
        let partner = rho_df(vt, r, &pair(h), &[0], &[1]).unwrap();
        let gap = (s.sqrt() - vt / s.sqrt()).max(0.0);
        assert_abs_diff_eq!(partner, 2.0 * vt + gap * gap / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn rho_star_on_identity_and_blocks() {
        let empty = Gosd::from_edges(3, &[]).unwrap();
        let star = rho_star_j(0.35, 3.0, &DMatrix::identity(3, 3), &empty, 1, 6).unwrap();
        assert_abs_diff_eq!(star.value, 3.35f64.powi(2) / 12.0, epsilon = 1e-12);
        assert_eq!((star.d, star.f), (vec![1], vec![]));

        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 0.8;
        m[(1, 0)] = 0.8;
        m[(2, 3)] = -0.8;
        m[(3, 2)] = -0.8;
        let g = Gosd::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let star = rho_star_j(0.5, 4.0, &m, &g, 0, 4).unwrap();
        assert_abs_diff_eq!(star.value, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(star.value, rho_gs_block(0.5, 4.0, 0.8).unwrap().value, epsilon = 1e-12);
    }

    #[test]
    fn lambda_star_cases() {
        assert_abs_diff_eq!(lambda_k_star(&DMatrix::identity(5, 5), 3, None).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lambda_k_star(&pair(-0.7), 2, None).unwrap(), 0.3, epsilon = 1e-12);
        assert!(matches!(
            lambda_k_star(&DMatrix::identity(31, 31), 2, None),
            Err(ExponentError::DimensionTooLarge(31))
        ));
    }

    #[test]
    fn restricted_lambda_on_sparse_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = 20;
        // A path plus random chords, so every edge lies in some connected triple.
        let mut edges: Vec<(usize, usize)> = (1..p).map(|i| (i - 1, i)).collect();
        for _ in 0..6 {
            let a = rng.random_range(0..p);
            let b = rng.random_range(0..p);
            if a != b {
                edges.push((a, b));
            }
        }
        let g = Gosd::from_edges(p, &edges).unwrap();
        let mut m = DMatrix::identity(p, p);
        for (a, b) in g.edges() {
            let v = rng.random_range(-0.25..0.25);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
        let full = lambda_k_star(&m, 3, None).unwrap();
        let restricted = lambda_k_star(&m, 3, Some(&g)).unwrap();
        assert_abs_diff_eq!(full, restricted, epsilon = 1e-12);

        let mut dense = m.clone();
        dense[(0, 10)] = 0.2;
        dense[(10, 0)] = 0.2;
        let full = lambda_k_star(&dense, 3, None).unwrap();
        let restricted = lambda_k_star(&dense, 3, Some(&g)).unwrap();
        assert!(restricted >= full - 1e-12);
    }

    #[test]
    fn reference_gs_cells() {
        let cells = [
            (0.1, 11.0, 0.8, 1.1406),
            (0.3, 9.0, 0.8, 1.2000),
            (0.5, 4.0, 0.8, 0.9000),
            (0.1, 4.0, 0.4, 0.9907),
            (0.3, 4.0, 0.4, 1.1556),
            (0.5, 4.0, 0.4, 1.2656),
            (0.1, 3.0, 0.2, 0.8008),
            (0.3, 3.0, 0.2, 0.9075),
        ];
        for (vt, r, h, want) in cells {
            let got = rho_gs_block(vt, r, h).unwrap().value;
            assert!((got - want).abs() <= 5e-5, "gs({vt},{r},{h}) = {got}");
        }
        assert_abs_diff_eq!(rho_lasso_block(0.1, 11.0, 0.8).unwrap().value, 0.2, epsilon = 5e-5);
    }

    #[test]
    fn zero_correlation_collapses_to_single_term() {
        for (vt, r) in [(0.2, 3.0), (0.5, 1.5), (0.35, 8.0)] {
            let gs = rho_gs_block(vt, r, 0.0).unwrap();
            let ss = rho_ss_block(vt, r, 0.0).unwrap();
            let lasso = rho_lasso_block(vt, r, 0.0).unwrap();
            let want = (vt + r).powi(2) / (4.0 * r);
            assert_abs_diff_eq!(gs.value, want, epsilon = 1e-12);
            assert_abs_diff_eq!(ss.value, want, epsilon = 1e-12);
            assert_abs_diff_eq!(lasso.value, want, epsilon = 1e-12);
            assert_eq!(gs.branch, "single");
        }
    }

    #[test]
    fn block_gs_matches_rho_star_search() {
        for (vt, r, h) in [(0.3, 4.0, 0.4), (0.1, 3.0, 0.2), (0.5, 4.0, 0.8), (0.2, 6.0, -0.6)] {
            let m = pair(h);
            let g = Gosd::from_edges(2, &[(0, 1)]).unwrap();
            let star = rho_star_j(vt, r, &m, &g, 0, 2).unwrap();
            assert_abs_diff_eq!(star.value, rho_gs_block(vt, r, h).unwrap().value, epsilon = 1e-12);
        }
    }

    #[test]
    fn universal_values() {
        assert_eq!(universal_exponent(0.4, 0.4).unwrap().per_signal, 0.0);
        let boundary = (1.0 + 0.75f64.sqrt()).powi(2);
        assert_abs_diff_eq!(universal_exponent(0.25, boundary).unwrap().total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(universal_exponent(0.5, 2.0).unwrap().total, 0.78125, epsilon = 1e-12);
    }

    #[test]
    fn gs_boundary_without_correlation() {
        let pts = phase_boundary(ExponentMethod::Gs, 0.0, &[0.5]).unwrap();
        assert_eq!(pts.len(), 1);
        assert_abs_diff_eq!(pts[0].r, (1.0 + 0.5f64.sqrt()).powi(2), epsilon = 1e-9);
        assert_eq!(pts[0].kind, CrossingKind::Root);
    }

    #[test]
    fn gs_boundary_with_correlation_is_self_consistent() {
        let pts = phase_boundary(ExponentMethod::Gs, 0.5, &[0.9]).unwrap();
        for pt in pts {
            let rho = rho_gs_block(pt.vartheta, pt.r, 0.5).unwrap().value;
            assert!((rho - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_tends_to_one_as_vartheta_tends_to_one() {
        for method in [ExponentMethod::Gs, ExponentMethod::Ss, ExponentMethod::Lasso] {
            let pts = phase_boundary(method, 0.3, &[0.999]).unwrap();
            assert!((pts[0].r - 1.0).abs() < 0.1, "{method:?}: {}", pts[0].r);
        }
    }

    #[test]
    fn corollary_examples() {
        let id = DMatrix::identity(6, 6);
        let rep = check_corollary_conditions(&id, 0.25, 1.0, None).unwrap();
        assert!(rep.entrywise.holds);

        let mut block = DMatrix::identity(4, 4);
        block[(0, 1)] = 0.7;
        block[(1, 0)] = 0.7;
        let rep = check_corollary_conditions(&block, 0.25, 1.0, None).unwrap();
        assert!(!rep.entrywise.holds);
        assert!(rep.entrywise.violated.unwrap().contains("0.6569"));

        let mut mild = DMatrix::identity(5, 5);
        for i in 0..4 {
            mild[(i, i + 1)] = 0.3;
            mild[(i + 1, i)] = 0.3;
        }
        let rep = check_corollary_conditions(&mild, 0.25, 1.5, None).unwrap();
        assert!(rep.small_eigen.holds, "{:?}", rep.small_eigen);
        mild[(0, 1)] = 0.62;
        mild[(1, 0)] = 0.62;
        let rep = check_corollary_conditions(&mild, 0.25, 1.5, None).unwrap();
        assert!(rep.small_eigen.violated.unwrap().contains("0.5959"));
        assert_abs_diff_eq!(2.0 * (5.0 - 2.0 * 6f64.sqrt()), 0.2021, epsilon = 1e-4);
        assert_abs_diff_eq!(5.0 - 2.0 * 6f64.sqrt(), 0.1011, epsilon = 1e-4);
    }

    #[test]
    fn n_bracket_definition() {
        let rep = check_corollary_conditions(&DMatrix::identity(3, 3), 0.2, 2.0, None).unwrap();
        let t = (10.0 + 0.1) / 2.0;
        let n = rep.n_bracket as f64;
        assert!(2.0 * n - 1.0 <= t && t < 2.0 * n + 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn omega_is_homogeneous(seed in 0u64..10_000, c in 0.1f64..10.0, k in 1usize..5) {
            let m = random_pd(k, seed);
            let base = omega_min(&m).unwrap().value;
            let scaled = omega_min(&(&m * c)).unwrap().value;
            prop_assert!((scaled - c * base).abs() <= 1e-9 * (1.0 + c * base));
        }

        #[test]
        fn omega_dominates_smallest_eigenvalue(seed in 0u64..10_000, k in 1usize..6) {
            let m = random_pd(k, seed);
            let value = omega_min(&m).unwrap().value;
            let lmin = SymmetricEigen::new(m.clone()).eigenvalues.min();
            prop_assert!(value >= lmin * k as f64 - 1e-9);
            let w = omega_min(&m).unwrap().witness;
            prop_assert!(w.iter().all(|v| v.abs() >= 1.0 - 1e-9));
        }

        #[test]
        fn block_exponents_are_ordered(vt in 0.02f64..0.98, excess in 0.01f64..15.0, h in -0.95f64..0.95) {
            let r = vt + excess;
            let gs = rho_gs_block(vt, r, h).unwrap().value;
            let ss = rho_ss_block(vt, r, h).unwrap().value;
            let lasso = rho_lasso_block(vt, r, h).unwrap().value;
            prop_assert!(gs >= ss - 1e-9, "gs {} < ss {}", gs, ss);
            prop_assert!(ss >= lasso - 1e-9, "ss {} < lasso {}", ss, lasso);
            prop_assert!(lasso >= 0.0);
        }

        #[test]
        fn rho_star_on_identity_is_single_term(vt in 0.02f64..0.98, excess in 0.01f64..15.0) {
            let r = vt + excess;
            let g = Gosd::from_edges(2, &[]).unwrap();
            let star = rho_star_j(vt, r, &DMatrix::identity(2, 2), &g, 0, 5).unwrap();
            prop_assert!((star.value - (vt + r).powi(2) / (4.0 * r)).abs() < 1e-12);
        }
    }
}
