//! Replication runner: draws data per (setting group, replication), runs every configured
//! method on the same draw and aggregates sign-Hamming errors.

use gscreen::baselines::{
    lambda_max, lasso_best_hamming_gram, log_grid, DEFAULT_GRID_LEN, DEFAULT_GRID_RATIO,
};
use gscreen::model::{
    build_gram, derive_calibration, ArwParams, DesignData, GramMatrix, QRule, TuningParams,
    FIXED_DESIGN_TOL_NORM,
};
use gscreen::selector::{InitialEstimate, PreparedDesign, SelectionResult, SelectorError};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{random_design_tol, symmetric_sqrt, CholeskyRows, DesignMode};
use crate::metrics::hamming;
use crate::misspec::{apply_misspecification, Misspecification};
use crate::noise::{gen_noise, NoiseKind};
use crate::omega::{gen_omega, OmegaKind};
use crate::signal::{gen_signal, SignalLaw};
use crate::{derive_seed, SimError};

const OMEGA_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gs,
    Ups,
    Lasso,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Gs => "gs",
            Self::Ups => "ups",
            Self::Lasso => "lasso",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

/// One cell of an experiment grid: the data-generating knobs plus the tuning perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub vartheta: f64,
    pub tau: f64,
    pub law: SignalLaw,
    /// Share of multi-signal blocks for the block laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub misspecification: Misspecification,
    /// Scales the branch value of the q rule.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub q_multiplier: f64,
    /// Ratio of the ϑ given to the tuning to the true ϑ.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub vartheta_ratio: f64,
    /// Ratio of the r given to the tuning to the true r.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub r_ratio: f64,
}

impl Setting {
    pub fn new(vartheta: f64, tau: f64, law: SignalLaw) -> Self {
        Self {
            vartheta,
            tau,
            law,
            eta: None,
            noise: NoiseKind::Gaussian,
            misspecification: Misspecification::None,
            q_multiplier: 1.0,
            vartheta_ratio: 1.0,
            r_ratio: 1.0,
        }
    }

    /// Whether `other` draws its data from the same distribution.
    fn same_data(&self, other: &Self) -> bool {
        self.vartheta == other.vartheta
            && self.tau == other.tau
            && self.law == other.law
            && self.eta == other.eta
            && self.noise == other.noise
            && self.misspecification == other.misspecification
    }
}

/// Screening-and-cleaning options shared by every setting of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsOptions {
    pub m0: usize,
    pub q_rule: QRule,
    pub q0: f64,
    /// Screening passes; more than one switches on the anchored iteration.
    pub iterations: usize,
    pub initial: InitialEstimate,
}

impl Default for GsOptions {
    fn default() -> Self {
        Self {
            m0: 3,
            q_rule: QRule::Max,
            q0: 0.25,
            iterations: 1,
            initial: InitialEstimate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub p: usize,
    /// n = round(p^κ) for random designs; fixed designs use n = p.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub design: DesignMode,
    pub omega: OmegaKind,
    /// Independent Ω draws for random correlation kinds; replications are split evenly.
    #[serde(default = "one_draw")]
    pub omega_draws: usize,
    pub settings: Vec<Setting>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub gs: GsOptions,
    /// Modelling choices worth carrying into the report.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn one_draw() -> usize {
    1
}

impl ExperimentConfig {
    pub fn n(&self) -> usize {
        match (self.design, self.kappa) {
            (DesignMode::Random, Some(kappa)) => (self.p as f64).powf(kappa).round() as usize,
            _ => self.p,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidParameter(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.p < 2 {
            return bad(format!("p = {} is too small", self.p));
        }
        if self.settings.is_empty() || self.methods.is_empty() {
            return bad("need at least one setting and one method".into());
        }
        if self.omega_draws == 0 {
            return bad("omega_draws must be at least 1".into());
        }
        if self.design == DesignMode::Random && self.kappa.is_none() {
            return bad("random designs need kappa".into());
        }
        if self.design == DesignMode::Fixed && self.kappa.is_some() {
            return bad("fixed designs use n = p; drop kappa".into());
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        for s in &self.settings {
            let mut params = ArwParams::from_tau(s.vartheta, s.tau, self.sigma, self.p)?;
            if let Some(kappa) = self.kappa {
                params = params.with_kappa(kappa)?;
            }
            ArwParams::new(s.vartheta * s.vartheta_ratio, params.r * s.r_ratio, self.p)?;
            s.noise.validate()?;
            if s.q_multiplier <= 0.0 {
                return bad(format!("q multiplier {} must be positive", s.q_multiplier));
            }
        }
        self.tuning_template(&ArwParams::new(0.5, 1.0, self.p)?).validate()?;
        Ok(())
    }

    fn tuning_template(&self, assumed: &ArwParams) -> TuningParams {
        TuningParams {
            m0: self.gs.m0,
            q_rule: self.gs.q_rule,
            q0: self.gs.q0,
            max_iterations: self.gs.iterations,
            ..TuningParams::from_arw(assumed, self.sigma)
        }
    }
}

/// Result of one method on one replication of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub setting: usize,
    pub rep: usize,
    pub method: Method,
    pub distance: Option<usize>,
    pub ratio: Option<f64>,
    pub signals: usize,
    /// True signals missing from the screened set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_misses: Option<usize>,
    /// Largest component of the screened set (also reported when cleaning aborts on it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_component: Option<usize>,
    /// λ attaining the best lasso error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean and standard deviation of the completed replications of one (setting, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub setting: usize,
    pub method: Method,
    pub mean_distance: f64,
    pub sd_distance: f64,
    pub mean_ratio: f64,
    pub sd_ratio: f64,
    pub completed: usize,
    pub failed: usize,
}

impl MethodSummary {
    pub fn se_distance(&self) -> f64 {
        self.sd_distance / (self.completed as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub summaries: Vec<MethodSummary>,
    pub outcomes: Vec<RepOutcome>,
}

impl HammingReport {
    pub fn summary(&self, setting: usize, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.setting == setting && s.method == method)
    }

    pub fn outcomes_for(&self, setting: usize, method: Method) -> impl Iterator<Item = &RepOutcome> {
        self.outcomes.iter().filter(move |o| o.setting == setting && o.method == method)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Precomputed per Ω draw.
enum DrawCache {
    Random(CholeskyRows),
    Fixed { x: DMatrix<f64>, gram: GramMatrix },
}

fn prepare_draws(config: &ExperimentConfig) -> Result<Vec<DrawCache>, SimError> {
    let draws = if config.omega.is_random() { config.omega_draws } else { 1 };
    (0..draws)
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, OMEGA_STREAM, d as u64, 0));
            let omega = gen_omega(config.omega, config.p, &mut rng)?;
            Ok(match config.design {
                DesignMode::Random => DrawCache::Random(CholeskyRows::new(&omega)?),
                DesignMode::Fixed => {
                    let x = symmetric_sqrt(&omega)?;
                    let gram = GramMatrix::from_matrix(x.transpose() * &x)?;
                    DrawCache::Fixed { x, gram }
                }
            })
        })
        .collect()
}

fn selection_outcome(
    setting: usize,
    rep: usize,
    method: Method,
    truth: &nalgebra::DVector<f64>,
    result: Result<SelectionResult, SelectorError>,
) -> RepOutcome {
    let signals = truth.iter().filter(|&&b| b != 0.0).count();
    let mut out = RepOutcome {
        setting,
        rep,
        method,
        distance: None,
        ratio: None,
        signals,
        screen_misses: None,
        max_component: None,
        lambda: None,
        error: None,
    };
    match result {
        Ok(res) => {
            let score = hamming(&res.beta_hat, truth);
            out.distance = Some(score.distance);
            out.ratio = Some(score.ratio);
            out.screen_misses = Some(
                (0..truth.len())
                    .filter(|&j| truth[j] != 0.0 && res.retained.binary_search(&j).is_err())
                    .count(),
            );
            out.max_component = Some(res.diagnostics.max_component_size);
        }
        Err(e) => {
            if let SelectorError::SasViolation { size, .. } = e {
                out.max_component = Some(size);
            }
            out.error = Some(e.to_string());
        }
    }
    out
}

/// All methods on one data draw shared by the settings in `group`.
fn run_item(
    config: &ExperimentConfig,
    draws: &[DrawCache],
    group: &[usize],
    group_index: usize,
    rep: usize,
) -> Vec<RepOutcome> {
    match run_item_inner(config, draws, group, group_index, rep) {
        Ok(outcomes) => outcomes,
        Err(e) => {
            log::warn!("replication {rep} of setting group {group_index} failed: {e}");
            let message = e.to_string();
            group
                .iter()
                .flat_map(|&s| {
                    let message = message.clone();
                    config.methods.iter().map(move |&method| RepOutcome {
                        setting: s,
                        rep,
                        method,
                        distance: None,
                        ratio: None,
                        signals: 0,
                        screen_misses: None,
                        max_component: None,
                        lambda: None,
                        error: Some(message.clone()),
                    })
                })
                .collect()
        }
    }
}

fn run_item_inner(
    config: &ExperimentConfig,
    draws: &[DrawCache],
    group: &[usize],
    group_index: usize,
    rep: usize,
) -> Result<Vec<RepOutcome>, SimError> {
    let lead = &config.settings[group[0]];
    let sigma = config.sigma;
    let p = config.p;
    let n = config.n();
    let per_draw = config.reps.div_ceil(draws.len());
    let cache = &draws[(rep / per_draw).min(draws.len() - 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        DATA_STREAM,
        group_index as u64,
        rep as u64,
    ));
    let truth_params = ArwParams::from_tau(lead.vartheta, lead.tau, sigma, p)?;
    let eps_p = derive_calibration(&truth_params, sigma).eps_p;
    let signal = gen_signal(lead.law, eps_p, lead.tau, p, lead.eta, &mut rng)?;
    let (x, fixed_gram, tol) = match cache {
        DrawCache::Random(factor) => (factor.sample(n, &mut rng), None, random_design_tol(n)),
        DrawCache::Fixed { x, gram } => (x.clone(), Some(gram), 1e3 * FIXED_DESIGN_TOL_NORM),
    };
    let noise = gen_noise(lead.noise, n, &mut rng)? * sigma;
    let observed = apply_misspecification(lead.misspecification, x, &signal.beta, &noise, &mut rng)?;
    let full_width = observed.visible.len() == p;
    let design = DesignData::new(observed.x, observed.y, sigma, tol)?;
    let gram = match fixed_gram {
        Some(g) if full_width => g.clone(),
        _ => build_gram(&design),
    };
    let p_seen = design.p();
    let truth = &observed.truth;
    let delta = gscreen::model::default_delta(p_seen);
    let prepared = PreparedDesign::with_gram(&design, gram, delta)?;

    let mut outcomes = Vec::new();
    let lasso = if config.methods.contains(&Method::Lasso) {
        let xty = design.xt_times(design.y());
        let grid = log_grid(lambda_max(&xty), DEFAULT_GRID_LEN, DEFAULT_GRID_RATIO);
        let truth_spec = gscreen::model::SignalSpec::new(truth.clone(), signal.mu_law)?;
        Some(lasso_best_hamming_gram(prepared.gram(), &xty, &truth_spec, &grid))
    } else {
        None
    };
    for &s in group {
        let setting = &config.settings[s];
        let true_r = ArwParams::from_tau(setting.vartheta, setting.tau, sigma, p)?.r;
        let assumed = ArwParams::new(
            setting.vartheta * setting.vartheta_ratio,
            true_r * setting.r_ratio,
            p_seen,
        )?;
        let mut tuning = config.tuning_template(&assumed);
        tuning.q_multiplier = setting.q_multiplier;
        tuning.delta = delta;
        for &method in &config.methods {
            let outcome = match method {
                Method::Gs | Method::Ups => {
                    let t = if method == Method::Ups {
                        TuningParams { m0: 1, ..tuning.clone() }
                    } else {
                        tuning.clone()
                    };
                    let result = if t.max_iterations > 1 {
                        prepared.iterative_gs(&assumed, &t, config.gs.initial)
                    } else {
                        prepared.graphlet_screening(&assumed, &t)
                    };
                    selection_outcome(s, rep, method, truth, result)
                }
                Method::Lasso => {
                    let signals = truth.iter().filter(|&&b| b != 0.0).count();
                    match lasso.as_ref().expect("lasso fitted above") {
                        Ok(best) => RepOutcome {
                            setting: s,
                            rep,
                            method,
                            distance: Some(best.hamming),
                            ratio: Some(if signals == 0 {
                                best.hamming as f64
                            } else {
                                best.hamming as f64 / signals as f64
                            }),
                            signals,
                            screen_misses: None,
                            max_component: None,
                            lambda: Some(best.lambda),
                            error: None,
                        },
                        Err(e) => RepOutcome {
                            setting: s,
                            rep,
                            method,
                            distance: None,
                            ratio: None,
                            signals,
                            screen_misses: None,
                            max_component: None,
                            lambda: None,
                            error: Some(e.to_string()),
                        },
                    }
                }
            };
            outcomes.push(outcome);
        }
    }
    Ok(outcomes)
}

/// Groups settings that share a data distribution, in order of first appearance.
fn data_groups(settings: &[Setting]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in settings.iter().enumerate() {
        match groups.iter_mut().find(|g| settings[g[0]].same_data(s)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups
}

/// Runs every replication; the report is a pure function of the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<HammingReport, SimError> {
    config.validate()?;
    let draws = prepare_draws(config)?;
    let groups = data_groups(&config.settings);
    let items: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..config.reps).map(move |r| (g, r)))
        .collect();
    let mut outcomes: Vec<RepOutcome> = items
        .par_iter()
        .flat_map_iter(|&(g, r)| run_item(config, &draws, &groups[g], g, r))
        .collect();
    outcomes.sort_by_key(|o| (o.setting, o.method, o.rep));

    let mut summaries = Vec::new();
    for s in 0..config.settings.len() {
        for &method in &config.methods {
            let done: Vec<&RepOutcome> = outcomes
                .iter()
                .filter(|o| o.setting == s && o.method == method && o.distance.is_some())
                .collect();
            let distances: Vec<f64> = done.iter().map(|o| o.distance.unwrap() as f64).collect();
            let ratios: Vec<f64> = done.iter().map(|o| o.ratio.unwrap()).collect();
            let (mean_distance, sd_distance) = mean_sd(&distances);
            let (mean_ratio, sd_ratio) = mean_sd(&ratios);
            summaries.push(MethodSummary {
                setting: s,
                method,
                mean_distance,
                sd_distance,
                mean_ratio,
                sd_ratio,
                completed: done.len(),
                failed: config.reps - done.len(),
            });
        }
    }
    Ok(HammingReport {
        config: config.clone(),
        seed: config.seed,
        summaries,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            id: "test".into(),
            p: 200,
            kappa: None,
            design: DesignMode::Fixed,
            omega: OmegaKind::Block2 { h0: 0.5 },
            omega_draws: 1,
            settings: vec![
                Setting::new(0.35, 6.0, SignalLaw::IidMixture),
                Setting { q_multiplier: 1.2, ..Setting::new(0.35, 6.0, SignalLaw::IidMixture) },
            ],
            methods: vec![Method::Gs, Method::Ups, Method::Lasso],
            reps: 3,
            seed: 11,
            sigma: 1.0,
            gs: GsOptions::default(),
            notes: vec![],
        }
    }

    #[test]
    fn deterministic_reports() {
        let config = small_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        // NaN summaries of failed cells would defeat PartialEq; compare the serialized form.
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.outcomes.len(), 2 * 3 * 3);
        assert!(a.outcomes.iter().all(|o| o.error.is_none()));
        assert_eq!(a.summaries.len(), 6);
    }

    #[test]
    fn tuning_variants_share_data() {
        let report = run_experiment(&small_config()).unwrap();
        for rep in 0..3 {
            let signals: Vec<usize> = report
                .outcomes
                .iter()
                .filter(|o| o.rep == rep && o.method == Method::Lasso)
                .map(|o| o.signals)
                .collect();
            assert_eq!(signals[0], signals[1]);
        }
        // The lasso ignores the q multiplier, so both settings report the same errors.
        let l0: Vec<_> = report.outcomes_for(0, Method::Lasso).map(|o| o.distance).collect();
        let l1: Vec<_> = report.outcomes_for(1, Method::Lasso).map(|o| o.distance).collect();
        assert_eq!(l0, l1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small_config();
        c.reps = 0;
        assert!(run_experiment(&c).is_err());
        let mut c = small_config();
        c.design = DesignMode::Random;
        assert!(c.validate().is_err());
        c.kappa = Some(0.5);
        assert!(c.validate().is_err());
        c.kappa = Some(0.975);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = small_config();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
