//! The screen-and-clean estimator: sequential χ² screening over connected subgraphs of the
//! dependence graph, exhaustive L0-penalized cleaning of each retained component, and an
//! iterative wrapper that profiles out a least-squares fit on the previous pass.

use nalgebra::{Cholesky, ColPivQR, DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::exponents::{omega_df, ExponentError};
use crate::graphs::{
    build_gosd, components_of, enumerate_connected_subgraphs, GraphError, Gosd, SubgraphList,
};
use crate::model::{
    build_gram, derive_calibration, regularize_gram, ArwParams, DesignData, GramMatrix, ModelError,
    QRule, RegularizedGram, TuningParams,
};

/// Relative tolerance on the pivots of the column-pivoted QR below which a block is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Objective gap within which cleaning candidates count as tied.
pub const OBJECTIVE_TIE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("columns {0:?} are linearly dependent")]
    RankDeficient(Vec<usize>),
    #[error("F must be a subset of I0")]
    NotNested,
    #[error("retained component of size {size} exceeds the cap {cap}; the retained set does not split into small pieces")]
    SasViolation { size: usize, cap: usize },
    #[error("inputs disagree on the number of predictors: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

/// `‖P_I y‖²` for the column block `I` of `x`; the empty block projects to zero.
fn projection_norm_sq(
    x: &DMatrix<f64>,
    cols: &[usize],
    y: &DVector<f64>,
) -> Result<f64, SelectorError> {
    if cols.is_empty() {
        return Ok(0.0);
    }
    if cols.len() > x.nrows() {
        return Err(SelectorError::RankDeficient(cols.to_vec()));
    }
    let qr = ColPivQR::new(x.select_columns(cols.iter()));
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 || (0..cols.len()).any(|i| r[(i, i)].abs() <= RANK_TOLERANCE * lead) {
        return Err(SelectorError::RankDeficient(cols.to_vec()));
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    Ok(qty.rows(0, cols.len()).norm_squared())
}

fn chi2_on(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    i0: &[usize],
    f: &[usize],
) -> Result<f64, SelectorError> {
    let full = projection_norm_sq(x, i0, y)?;
    let nested = projection_norm_sq(x, f, y)?;
    Ok((full - nested).max(0.0))
}

/// `‖P_{I0} Y‖² − ‖P_F Y‖²` for `F ⊆ I0`.
pub fn chi2_statistic(design: &DesignData, i0: &[usize], f: &[usize]) -> Result<f64, SelectorError> {
    if f.iter().any(|j| !i0.contains(j)) {
        return Err(SelectorError::NotNested);
    }
    let p = design.p();
    if let Some(&bad) = i0.iter().find(|&&j| j >= p) {
        return Err(GraphError::VertexOutOfRange { vertex: bad, p }.into());
    }
    chi2_on(design.x(), design.y(), i0, f)
}

/// ω of the plug-in matrix `m` (indexed locally) for the split `(D, F)`.
pub fn omega_plugin(m: &DMatrix<f64>, d: &[usize], f: &[usize]) -> Result<f64, ExponentError> {
    omega_df(m, d, f)
}

/// The q constant for a test with `card_d` new coordinates, floored at `q0`.
pub fn select_q(omega: f64, card_d: usize, params: &ArwParams, rule: QRule, q0: f64) -> f64 {
    select_q_scaled(omega, card_d, params, rule, q0, 1.0)
}

/// As [`select_q`], with the branch value scaled by `multiplier` before flooring.
pub fn select_q_scaled(
    omega: f64,
    card_d: usize,
    params: &ArwParams,
    rule: QRule,
    q0: f64,
    multiplier: f64,
) -> f64 {
    let branch = match rule {
        QRule::Fixed(q) => Some(q),
        QRule::Max | QRule::Conservative => {
            let (vt, wr) = (params.vartheta, omega * params.r);
            let d = card_d as f64;
            let x = wr / vt;
            if card_d % 2 == 1 && x > d + (d * d - 1.0).sqrt() {
                Some(match rule {
                    QRule::Max => {
                        let inner = (vt + wr).powi(2) / (4.0 * wr) - (d + 1.0) * vt / 2.0;
                        (wr.sqrt() - inner.max(0.0).sqrt()).powi(2)
                    }
                    _ => (wr + vt).powi(2) / (4.0 * wr),
                })
            } else if card_d % 2 == 0 && x >= 2.0 * d {
                Some(match rule {
                    QRule::Max => {
                        let inner = wr / 4.0 - d * vt / 2.0;
                        (wr.sqrt() - inner.max(0.0).sqrt()).powi(2)
                    }
                    _ => wr / 4.0,
                })
            } else {
                None
            }
        }
    };
    match branch {
        Some(q) => (q * multiplier).max(q0),
        None => q0,
    }
}

/// Outcome of one screening test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Accepted,
    Rejected,
    /// Collinear columns; counted as a rejection.
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub subgraph: Vec<usize>,
    pub d: Vec<usize>,
    pub f: Vec<usize>,
    pub statistic: f64,
    pub threshold: f64,
    pub outcome: TestOutcome,
}

/// Retained set of the screening pass with per-test bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenState {
    /// Indices in order of retention.
    retained: Vec<usize>,
    #[serde(skip)]
    member: Vec<bool>,
    pub trace: Vec<TestRecord>,
    pub tests_run: usize,
    pub rank_deficient_tests: usize,
    /// Tests whose plug-in ω could not be computed and fell back to q0.
    pub omega_fallbacks: usize,
}

impl ScreenState {
    pub fn empty(p: usize) -> Self {
        Self {
            retained: Vec::new(),
            member: vec![false; p],
            trace: Vec::new(),
            tests_run: 0,
            rank_deficient_tests: 0,
            omega_fallbacks: 0,
        }
    }

    /// Retained indices in order of retention.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn contains(&self, j: usize) -> bool {
        self.member[j]
    }

    pub fn sorted_retained(&self) -> Vec<usize> {
        let mut v = self.retained.clone();
        v.sort_unstable();
        v
    }

    fn retain(&mut self, d: &[usize]) {
        for &j in d {
            if !self.member[j] {
                self.member[j] = true;
                self.retained.push(j);
            }
        }
    }
}

/// `w'Γ⁻¹w`, or `None` when `Γ` is numerically singular.
fn quadratic_form(gamma: &DMatrix<f64>, w: &DVector<f64>) -> Option<f64> {
    if w.is_empty() {
        return Some(0.0);
    }
    let scale = gamma.diagonal().max().sqrt();
    let chol = Cholesky::new(gamma.clone())?;
    let l = chol.l_dirty();
    if !(scale > 0.0) || (0..w.len()).any(|i| l[(i, i)] <= RANK_TOLERANCE * scale) {
        return None;
    }
    Some(w.dot(&chol.solve(w)))
}

/// Least-squares fit of `Y` on an anchor column set `S`.
///
/// For a small column set `T` the local normal equations are those of `T` in the regression of
/// `Y` on `T ∪ S`, with the columns of `S \ T` profiled out. Spurious anchor columns only cost
/// degrees of freedom, and a signal outside the anchor is not absorbed by it.
struct Anchor<'a> {
    gram: &'a GramMatrix,
    /// Position of each column in the anchor.
    position: Vec<Option<usize>>,
    coef: DVector<f64>,
    /// Inverse of the anchor's Gram block.
    inverse: DMatrix<f64>,
    /// Gram rows of the anchor, |S| × p.
    rows: DMatrix<f64>,
    /// Anchor regression coefficients of every column, |S| × p.
    loadings: DMatrix<f64>,
    /// `X'r` for the anchor residual `r`.
    xt_resid: DVector<f64>,
}

impl<'a> Anchor<'a> {
    fn fit(design: &DesignData, gram: &'a GramMatrix, support: &[usize]) -> Option<Self> {
        let p = design.p();
        let chol = Cholesky::new(gram.submatrix(support))?;
        let xty = design.xt_times(design.y());
        let coef = chol.solve(&DVector::from_iterator(
            support.len(),
            support.iter().map(|&j| xty[j]),
        ));
        let rows = gram.matrix().select_rows(support.iter());
        let loadings = chol.solve(&rows);
        let xt_resid = xty - rows.tr_mul(&coef);
        let mut position = vec![None; p];
        for (k, &j) in support.iter().enumerate() {
            position[j] = Some(k);
        }
        Some(Self {
            gram,
            position,
            coef,
            inverse: chol.inverse(),
            rows,
            loadings,
            xt_resid,
        })
    }

    fn local_system(&self, set: &[usize]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let m = set.len();
        let (anchored, free): (Vec<usize>, Vec<usize>) =
            (0..m).partition(|&i| self.position[set[i]].is_some());
        let pos: Vec<usize> = anchored.iter().map(|&i| self.position[set[i]].unwrap()).collect();
        // Precision of the anchored coefficients: the Gram of their profiled columns.
        let precision = DMatrix::from_fn(pos.len(), pos.len(), |a, b| self.inverse[(pos[a], pos[b])])
            .try_inverse()?;
        let coef = DVector::from_iterator(pos.len(), pos.iter().map(|&k| self.coef[k]));
        let pc = &precision * &coef;
        let mut gamma = DMatrix::zeros(m, m);
        let mut w = DVector::zeros(m);
        for (a, &i) in anchored.iter().enumerate() {
            w[i] = pc[a];
            for (b, &k) in anchored.iter().enumerate() {
                gamma[(i, k)] = precision[(a, b)];
            }
        }
        let cross: Vec<DVector<f64>> = free
            .iter()
            .map(|&i| {
                let t = DVector::from_iterator(pos.len(), pos.iter().map(|&k| self.loadings[(k, set[i])]));
                &precision * t
            })
            .collect();
        for (a, &i) in free.iter().enumerate() {
            let col = set[i];
            let t_i = DVector::from_iterator(pos.len(), pos.iter().map(|&k| self.loadings[(k, col)]));
            w[i] = self.xt_resid[col] + cross[a].dot(&coef);
            for (b, &k) in anchored.iter().enumerate() {
                gamma[(i, k)] = cross[a][b];
                gamma[(k, i)] = cross[a][b];
            }
            for &k in &free {
                let other = set[k];
                let residual = self.gram.get(col, other)
                    - self.rows.column(col).dot(&self.loadings.column(other));
                let t_k = DVector::from_iterator(pos.len(), pos.iter().map(|&q| self.loadings[(q, other)]));
                gamma[(i, k)] = residual + t_i.dot(&(&precision * t_k));
            }
        }
        Some((gamma, w))
    }
}

/// What the statistics of a pass are computed from: the plain response, or the response with
/// an anchor fit profiled out.
enum Response<'a> {
    Plain {
        design: &'a DesignData,
        gram: &'a GramMatrix,
        xty: DVector<f64>,
    },
    Profiled(Anchor<'a>),
}

impl<'a> Response<'a> {
    fn plain(design: &'a DesignData, gram: &'a GramMatrix) -> Self {
        Self::Plain {
            design,
            gram,
            xty: design.xt_times(design.y()),
        }
    }

    /// Profiles `support` out, or stays plain when it is empty or its Gram block is singular.
    fn anchored(design: &'a DesignData, gram: &'a GramMatrix, support: &[usize]) -> Self {
        if support.is_empty() {
            return Self::plain(design, gram);
        }
        match Anchor::fit(design, gram, support) {
            Some(anchor) => Self::Profiled(anchor),
            None => {
                log::warn!("anchor of {} columns is singular; screening unadjusted", support.len());
                Self::plain(design, gram)
            }
        }
    }

    /// χ² statistic of `set` against its nested part `f`.
    fn statistic(&self, set: &[usize], f: &[usize]) -> Result<f64, SelectorError> {
        match self {
            Self::Plain { design, .. } => chi2_on(design.x(), design.y(), set, f),
            Self::Profiled(anchor) => {
                let deficient = || SelectorError::RankDeficient(set.to_vec());
                let (gamma, w) = anchor.local_system(set).ok_or_else(deficient)?;
                let full = quadratic_form(&gamma, &w).ok_or_else(deficient)?;
                let local: Vec<usize> = (0..set.len()).filter(|&i| f.contains(&set[i])).collect();
                let sub_gamma = DMatrix::from_fn(local.len(), local.len(), |a, b| gamma[(local[a], local[b])]);
                let sub_w = DVector::from_iterator(local.len(), local.iter().map(|&i| w[i]));
                let nested = quadratic_form(&sub_gamma, &sub_w).ok_or_else(deficient)?;
                Ok((full - nested).max(0.0))
            }
        }
    }

    /// Normal equations `(Γ, w)` of the columns `set`.
    fn local_system(&self, set: &[usize]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match self {
            Self::Plain { gram, xty, .. } => Some((
                gram.submatrix(set),
                DVector::from_iterator(set.len(), set.iter().map(|&j| xty[j])),
            )),
            Self::Profiled(anchor) => anchor.local_system(set),
        }
    }
}

fn screen(
    design: &DesignData,
    response: &Response<'_>,
    reg: &RegularizedGram,
    subs: &SubgraphList,
    tuning: &TuningParams,
    params: &ArwParams,
) -> ScreenState {
    let p = design.p();
    let log_p = (p as f64).ln();
    let sigma2 = design.sigma().powi(2);
    let mut state = ScreenState::empty(p);
    for set in subs.iter() {
        let (d, f): (Vec<usize>, Vec<usize>) = set.iter().partition(|&&j| !state.contains(j));
        if d.is_empty() {
            continue;
        }
        state.tests_run += 1;
        let local = reg.submatrix(set);
        let d_local: Vec<usize> = (0..set.len()).filter(|&a| !state.contains(set[a])).collect();
        let f_local: Vec<usize> = (0..set.len()).filter(|&a| state.contains(set[a])).collect();
        let q = match omega_plugin(&local, &d_local, &f_local) {
            Ok(omega) => select_q_scaled(
                omega,
                d.len(),
                params,
                tuning.q_rule,
                tuning.q0,
                tuning.q_multiplier,
            ),
            Err(_) => {
                state.omega_fallbacks += 1;
                tuning.q0
            }
        };
        let threshold = 2.0 * sigma2 * q * log_p;
        let (statistic, outcome) = match response.statistic(set, &f) {
            Ok(t) if t > threshold => (t, TestOutcome::Accepted),
            Ok(t) => (t, TestOutcome::Rejected),
            Err(_) => {
                state.rank_deficient_tests += 1;
                (f64::NAN, TestOutcome::RankDeficient)
            }
        };
        if outcome == TestOutcome::Accepted {
            state.retain(&d);
        }
        if tuning.record_trace {
            state.trace.push(TestRecord {
                subgraph: set.to_vec(),
                d,
                f,
                statistic,
                threshold,
                outcome,
            });
        }
    }
    state
}

/// Sequential χ² screening over `subs`.
pub fn gs_step(
    design: &DesignData,
    reg: &RegularizedGram,
    subs: &SubgraphList,
    tuning: &TuningParams,
    params: &ArwParams,
) -> Result<ScreenState, SelectorError> {
    if reg.p() != design.p() {
        return Err(SelectorError::SizeMismatch(reg.p(), design.p()));
    }
    tuning.validate()?;
    let gram = build_gram(design);
    Ok(screen(design, &Response::plain(design, &gram), reg, subs, tuning, params))
}

/// Cleaning result for one retained component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentFit {
    pub component: Vec<usize>,
    /// Chosen support, as global indices.
    pub support: Vec<usize>,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub subgraph_count: usize,
    pub tests_run: usize,
    pub rank_deficient_tests: usize,
    pub omega_fallbacks: usize,
    pub retained_count: usize,
    /// Largest retained component.
    pub max_component_size: usize,
    pub component_fits: Vec<ComponentFit>,
    /// Components skipped because their Gram block is singular.
    pub dropped_components: Vec<Vec<usize>>,
    /// Screening passes performed (1 unless iterated).
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    #[serde(serialize_with = "crate::model::dvector_serde::serialize")]
    pub beta_hat: DVector<f64>,
    pub selected: Vec<usize>,
    /// Retained set of the final screening pass, sorted.
    pub retained: Vec<usize>,
    pub components: Vec<Vec<usize>>,
    pub diagnostics: Diagnostics,
    pub trace: Vec<TestRecord>,
}

/// Minimizes the penalized cleaning objective over supports of one component.
///
/// `gram` is the component's Gram block and `ytilde` its adjusted `X'Y`.
fn clean_component(
    gram: &DMatrix<f64>,
    ytilde: &DVector<f64>,
    u: f64,
    v: f64,
) -> Option<(Vec<usize>, DVector<f64>, f64)> {
    let m = gram.nrows();
    let chol = Cholesky::new(gram.clone())?;
    let base = 0.5 * ytilde.dot(&chol.solve(ytilde));
    let objective = |xi: &DVector<f64>, size: usize| {
        base - xi.dot(ytilde) + 0.5 * xi.dot(&(gram * xi)) + 0.5 * u * u * size as f64
    };
    let solve_on = |idx: &[usize], rhs: DVector<f64>| -> Option<DVector<f64>> {
        let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
        Cholesky::new(block).map(|c| c.solve(&rhs))
    };
    let clamp = |x: f64| if x < 0.0 { -v } else { v };

    let mut candidates: Vec<(f64, usize, Vec<usize>, DVector<f64>)> = Vec::with_capacity(1 << m);
    for mask in 0u32..(1u32 << m) {
        let support: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let mut xi = DVector::zeros(m);
        if !support.is_empty() {
            let rhs = DVector::from_iterator(support.len(), support.iter().map(|&i| ytilde[i]));
            let Some(sol) = solve_on(&support, rhs) else {
                continue;
            };
            for (&i, &val) in support.iter().zip(sol.iter()) {
                xi[i] = val;
            }
            let (small, free): (Vec<usize>, Vec<usize>) =
                support.iter().partition(|&&i| xi[i].abs() < v);
            if !small.is_empty() {
                for &i in &small {
                    xi[i] = clamp(xi[i]);
                }
                if !free.is_empty() {
                    let rhs = DVector::from_iterator(
                        free.len(),
                        free.iter().map(|&a| {
                            ytilde[a] - small.iter().map(|&c| gram[(a, c)] * xi[c]).sum::<f64>()
                        }),
                    );
                    if let Some(sol) = solve_on(&free, rhs) {
                        for (&i, &val) in free.iter().zip(sol.iter()) {
                            // Keep the magnitude constraint even if the re-solve undershoots.
                            xi[i] = if val.abs() < v { clamp(val) } else { val };
                        }
                    }
                }
            }
        }
        let q = objective(&xi, support.len());
        candidates.push((q, support.len(), support, xi));
    }
    let best_q = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let (q, _, support, xi) = candidates
        .into_iter()
        .filter(|c| c.0 <= best_q + OBJECTIVE_TIE)
        .min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.2.cmp(&b.2)))?;
    Some((support, xi, q))
}

fn clean(
    design: &DesignData,
    response: &Response<'_>,
    state: &ScreenState,
    gosd: &Gosd,
    tuning: &TuningParams,
) -> Result<(DVector<f64>, Vec<Vec<usize>>, Vec<ComponentFit>, Vec<Vec<usize>>), SelectorError> {
    let p = design.p();
    let components = components_of(gosd, &state.sorted_retained())?;
    if let Some(big) = components.iter().find(|c| c.len() > tuning.component_cap) {
        return Err(SelectorError::SasViolation {
            size: big.len(),
            cap: tuning.component_cap,
        });
    }
    let mut beta_hat = DVector::zeros(p);
    let mut fits = Vec::new();
    let mut dropped = Vec::new();
    for comp in &components {
        let fit = response
            .local_system(comp)
            .and_then(|(block, ytilde)| clean_component(&block, &ytilde, tuning.u_gs, tuning.v_gs));
        match fit {
            Some((support, xi, objective)) => {
                for &a in &support {
                    beta_hat[comp[a]] = xi[a];
                }
                fits.push(ComponentFit {
                    component: comp.clone(),
                    support: support.iter().map(|&a| comp[a]).collect(),
                    objective,
                });
            }
            None => {
                log::warn!("dropping component {comp:?}: singular Gram block");
                dropped.push(comp.clone());
            }
        }
    }
    Ok((beta_hat, components, fits, dropped))
}

/// Exhaustive penalized cleaning of each retained component.
pub fn gc_step(
    design: &DesignData,
    state: &ScreenState,
    gosd: &Gosd,
    tuning: &TuningParams,
) -> Result<SelectionResult, SelectorError> {
    if gosd.p() != design.p() {
        return Err(SelectorError::SizeMismatch(gosd.p(), design.p()));
    }
    let gram = build_gram(design);
    finish(design, &Response::plain(design, &gram), state, gosd, tuning, 0)
}

fn finish(
    design: &DesignData,
    response: &Response<'_>,
    state: &ScreenState,
    gosd: &Gosd,
    tuning: &TuningParams,
    subgraph_count: usize,
) -> Result<SelectionResult, SelectorError> {
    let (beta_hat, components, fits, dropped) =
        clean(design, response, state, gosd, tuning)?;
    let selected: Vec<usize> = (0..design.p()).filter(|&j| beta_hat[j] != 0.0).collect();
    Ok(SelectionResult {
        beta_hat,
        selected,
        retained: state.sorted_retained(),
        diagnostics: Diagnostics {
            subgraph_count,
            tests_run: state.tests_run,
            rank_deficient_tests: state.rank_deficient_tests,
            omega_fallbacks: state.omega_fallbacks,
            retained_count: state.retained.len(),
            max_component_size: components.iter().map(Vec::len).max().unwrap_or(0),
            component_fits: fits,
            dropped_components: dropped,
            iterations: 1,
        },
        components,
        trace: state.trace.clone(),
    })
}

/// Gram matrix, its regularized copy and the dependence graph of a design, computed once and
/// shared by every estimator run on it.
#[derive(Debug, Clone)]
pub struct PreparedDesign<'a> {
    design: &'a DesignData,
    gram: GramMatrix,
    reg: RegularizedGram,
    gosd: Gosd,
}

impl<'a> PreparedDesign<'a> {
    pub fn new(design: &'a DesignData, delta: f64) -> Result<Self, SelectorError> {
        Self::with_gram(design, build_gram(design), delta)
    }

    /// Reuses a Gram matrix already computed for `design`.
    pub fn with_gram(
        design: &'a DesignData,
        gram: GramMatrix,
        delta: f64,
    ) -> Result<Self, SelectorError> {
        if gram.p() != design.p() {
            return Err(SelectorError::SizeMismatch(gram.p(), design.p()));
        }
        let reg = regularize_gram(&gram, delta)?;
        let gosd = build_gosd(&reg);
        Ok(Self {
            design,
            gram,
            reg,
            gosd,
        })
    }

    pub fn design(&self) -> &DesignData {
        self.design
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn regularized(&self) -> &RegularizedGram {
        &self.reg
    }

    pub fn gosd(&self) -> &Gosd {
        &self.gosd
    }

    /// One screening and cleaning pass with the columns of `anchor` profiled out.
    fn pass(
        &self,
        subs: &SubgraphList,
        params: &ArwParams,
        tuning: &TuningParams,
        anchor: &[usize],
    ) -> Result<SelectionResult, SelectorError> {
        let response = Response::anchored(self.design, &self.gram, anchor);
        let state = screen(self.design, &response, &self.reg, subs, tuning, params);
        finish(
            self.design,
            &response,
            &state,
            &self.gosd,
            tuning,
            subs.len(),
        )
    }

    fn subgraphs(&self, tuning: &TuningParams) -> Result<SubgraphList, SelectorError> {
        tuning.validate()?;
        Ok(enumerate_connected_subgraphs(
            &self.gosd,
            tuning.m0,
            tuning.subgraph_cap,
        )?)
    }

    /// Single screening and cleaning pass with `tuning.m0`.
    pub fn graphlet_screening(
        &self,
        params: &ArwParams,
        tuning: &TuningParams,
    ) -> Result<SelectionResult, SelectorError> {
        let subs = self.subgraphs(tuning)?;
        self.pass(&subs, params, tuning, &[])
    }

    /// Univariate screening: the same pass restricted to singletons.
    pub fn ups(
        &self,
        params: &ArwParams,
        tuning: &TuningParams,
    ) -> Result<SelectionResult, SelectorError> {
        self.graphlet_screening(params, &univariate(tuning))
    }

    /// Repeated passes, starting from `init`, for at most `tuning.max_iterations` passes; stops
    /// once the signed support repeats.
    ///
    /// Each pass profiles out a least-squares fit on an anchor set: the support of `init`, then
    /// the retained set of the previous pass (its selection if the retained set exceeds n/2
    /// columns). This removes the cross-talk of far-apart signals that a sampled Gram matrix
    /// leaves outside the dependence graph.
    pub fn iterative_gs(
        &self,
        params: &ArwParams,
        tuning: &TuningParams,
        init: InitialEstimate,
    ) -> Result<SelectionResult, SelectorError> {
        let subs = self.subgraphs(tuning)?;
        let mut previous = init.compute(self.design, params);
        let mut anchor: Vec<usize> = (0..previous.len()).filter(|&j| previous[j] != 0.0).collect();
        let mut result = None;
        for iteration in 1..=tuning.max_iterations {
            let mut current = self.pass(&subs, params, tuning, &anchor)?;
            current.diagnostics.iterations = iteration;
            let unchanged = signed_support(&current.beta_hat) == signed_support(&previous);
            anchor = if 2 * current.retained.len() <= self.design.n() {
                current.retained.clone()
            } else {
                current.selected.clone()
            };
            previous = current.beta_hat.clone();
            result = Some(current);
            if unchanged {
                break;
            }
        }
        Ok(result.expect("at least one iteration"))
    }

    /// Iterated univariate screening.
    pub fn iterative_ups(
        &self,
        params: &ArwParams,
        tuning: &TuningParams,
        init: InitialEstimate,
    ) -> Result<SelectionResult, SelectorError> {
        self.iterative_gs(params, &univariate(tuning), init)
    }
}

fn univariate(tuning: &TuningParams) -> TuningParams {
    TuningParams {
        m0: 1,
        ..tuning.clone()
    }
}

fn signed_support(beta: &DVector<f64>) -> Vec<i8> {
    beta.iter().map(|&b| b.partial_cmp(&0.0).map_or(0, |o| o as i8)).collect()
}

/// Starting estimate of the iterative wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialEstimate {
    Zero,
    /// `X'Y` hard-thresholded at `threshold`; `None` uses τ_p.
    HardThreshold { threshold: Option<f64> },
}

impl Default for InitialEstimate {
    fn default() -> Self {
        Self::HardThreshold { threshold: None }
    }
}

impl InitialEstimate {
    pub fn compute(self, design: &DesignData, params: &ArwParams) -> DVector<f64> {
        match self {
            Self::Zero => DVector::zeros(design.p()),
            Self::HardThreshold { threshold } => {
                let cut = threshold
                    .unwrap_or_else(|| derive_calibration(params, design.sigma()).tau_p);
                design.xt_times(design.y()).map(|v| if v.abs() >= cut { v } else { 0.0 })
            }
        }
    }
}

/// Full pipeline: Gram matrix, dependence graph, screening and cleaning.
pub fn graphlet_screening(
    design: &DesignData,
    params: &ArwParams,
    tuning: &TuningParams,
) -> Result<SelectionResult, SelectorError> {
    PreparedDesign::new(design, tuning.delta)?.graphlet_screening(params, tuning)
}

/// [`graphlet_screening`] with subgraphs limited to single vertices.
pub fn ups(
    design: &DesignData,
    params: &ArwParams,
    tuning: &TuningParams,
) -> Result<SelectionResult, SelectorError> {
    PreparedDesign::new(design, tuning.delta)?.ups(params, tuning)
}

pub fn iterative_gs(
    design: &DesignData,
    params: &ArwParams,
    tuning: &TuningParams,
    init: InitialEstimate,
) -> Result<SelectionResult, SelectorError> {
    PreparedDesign::new(design, tuning.delta)?.iterative_gs(params, tuning, init)
}
