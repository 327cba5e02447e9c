//! The benchmark suite: one configuration per experiment id, at full or desk scale.

use serde::{Deserialize, Serialize};

use crate::design::DesignMode;
use crate::experiment::{ExperimentConfig, GsOptions, Method, Setting};
use crate::misspec::Misspecification;
use crate::noise::NoiseKind;
use crate::omega::OmegaKind;
use crate::signal::SignalLaw;
use crate::SimError;

pub const EXPERIMENT_IDS: [&str; 14] = [
    "1", "2a", "2b", "3", "4a", "4b", "4c", "5a", "5b", "5c", "5d", "6a", "6b", "6c",
];

pub const DEFAULT_SEED: u64 = 20_130_601;
const KAPPA: f64 = 0.975;
/// Screening passes used with random designs, where residual adjustment removes
/// cross-component interference left by the sampled Gram matrix.
pub const RANDOM_DESIGN_ITERATIONS: usize = 5;

pub const Q_MULTIPLIERS: [f64; 6] = [0.7, 0.8, 0.9, 1.0, 1.1, 1.2];
pub const VARTHETA_RATIOS: [f64; 6] = [0.85, 0.925, 1.0, 1.075, 1.15, 1.225];
pub const R_RATIOS: [f64; 6] = [0.8, 0.9, 1.0, 1.1, 1.2, 1.3];
pub const T_DEGREES: [f64; 10] = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 30.0, 50.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// p = 5000 with the full replication counts.
    Full,
    /// p = 2000 and 20 replications.
    Reduced,
}

impl Scale {
    fn p(self) -> usize {
        match self {
            Self::Full => 5000,
            Self::Reduced => 2000,
        }
    }

    fn reps(self, full: usize) -> usize {
        match self {
            Self::Full => full,
            Self::Reduced => 20,
        }
    }
}

fn tau_from_r(r: f64, p: usize) -> f64 {
    (2.0 * r * (p as f64).ln()).sqrt()
}

struct Builder {
    config: ExperimentConfig,
}

impl Builder {
    fn new(id: &str, scale: Scale, design: DesignMode, omega: OmegaKind, reps: usize) -> Self {
        let random = design == DesignMode::Random;
        Self {
            config: ExperimentConfig {
                id: id.to_string(),
                p: scale.p(),
                kappa: random.then_some(KAPPA),
                design,
                omega,
                omega_draws: 1,
                settings: Vec::new(),
                methods: vec![Method::Gs, Method::Ups, Method::Lasso],
                reps: scale.reps(reps),
                seed: DEFAULT_SEED,
                sigma: 1.0,
                gs: GsOptions {
                    iterations: if random { RANDOM_DESIGN_ITERATIONS } else { 1 },
                    ..GsOptions::default()
                },
                notes: Vec::new(),
            },
        }
    }

    fn methods(mut self, methods: &[Method]) -> Self {
        self.config.methods = methods.to_vec();
        self
    }

    fn settings(mut self, settings: impl IntoIterator<Item = Setting>) -> Self {
        self.config.settings.extend(settings);
        self
    }

    fn note(mut self, note: &str) -> Self {
        self.config.notes.push(note.to_string());
        self
    }

    fn build(self) -> ExperimentConfig {
        self.config
    }
}

/// GS-only sensitivity grid over tuning perturbations of the four (ϑ, r) cells.
fn sensitivity(
    id: &str,
    scale: Scale,
    design: DesignMode,
    cells: &[(f64, f64)],
    perturb: impl Fn(Setting) -> Vec<Setting>,
) -> ExperimentConfig {
    let p = scale.p();
    Builder::new(id, scale, design, OmegaKind::Pentadiag, 40)
        .methods(&[Method::Gs])
        .settings(
            cells
                .iter()
                .flat_map(|&(vt, r)| perturb(Setting::new(vt, tau_from_r(r, p), SignalLaw::IidMixture))),
        )
        .build()
}

fn q_grid(base: Setting) -> Vec<Setting> {
    Q_MULTIPLIERS.iter().map(|&q| Setting { q_multiplier: q, ..base.clone() }).collect()
}

fn vartheta_grid(base: Setting) -> Vec<Setting> {
    VARTHETA_RATIOS.iter().map(|&v| Setting { vartheta_ratio: v, ..base.clone() }).collect()
}

fn r_grid(base: Setting) -> Vec<Setting> {
    R_RATIOS.iter().map(|&v| Setting { r_ratio: v, ..base.clone() }).collect()
}

/// Configuration of experiment `id`.
///
/// At reduced scale experiment 1 switches to a random design with n = round(p^0.975), the
/// desk-scale check of the method ordering.
pub fn preset(id: &str, scale: Scale) -> Result<ExperimentConfig, SimError> {
    let p = scale.p();
    let cells = [(0.35, 1.5), (0.35, 3.0), (0.6, 1.5), (0.6, 3.0)];
    let config = match id {
        "1" => {
            let design = match scale {
                Scale::Full => DesignMode::Fixed,
                Scale::Reduced => DesignMode::Random,
            };
            Builder::new(id, scale, design, OmegaKind::Block2 { h0: 0.7 }, 40)
                .settings([0.25, 0.4, 0.55].iter().flat_map(|&vt| {
                    (6..=10).map(move |tau| Setting::new(vt, tau as f64, SignalLaw::IidMixture))
                }))
                .build()
        }
        "2a" | "2b" => {
            let (omega, law) = if id == "2a" {
                (OmegaKind::Block2 { h0: 0.5 }, SignalLaw::BlockPairs)
            } else {
                (OmegaKind::Block4, SignalLaw::BlockQuads)
            };
            let mut b = Builder::new(id, scale, DesignMode::Random, omega, 40).settings(
                [0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.1, 0.2].iter().map(|&eta| Setting {
                    eta: Some(eta),
                    ..Setting::new(0.35, tau_from_r(3.0, p), law)
                }),
            );
            if id == "2b" {
                b = b.note("blocks with two to four signals pick uniformly among all 11 position patterns");
            }
            b.build()
        }
        "3" => Builder::new(id, scale, DesignMode::Random, OmegaKind::TridiagBlock, 40)
            .methods(&[Method::Gs, Method::Lasso])
            .settings([0.35, 0.5].iter().flat_map(|&vt| {
                [6.0, 8.0, 10.0].iter().flat_map(move |&tau| {
                    [SignalLaw::IidEqual { random_signs: false }, SignalLaw::IidMixture]
                        .map(|law| Setting::new(vt, tau, law))
                })
            }))
            .build(),
        "4a" | "4b" | "4c" => {
            let (omega, reps) = match id {
                "4a" => (OmegaKind::Block2 { h0: 0.5 }, 40),
                "4b" => (OmegaKind::Pentadiag, 40),
                _ => (OmegaKind::RandomSparse { k: 3, a: 0.7 }, 50),
            };
            let mut config = Builder::new(id, scale, DesignMode::Random, omega, reps)
                .methods(&[Method::Gs, Method::Lasso])
                .settings((6..=12).map(|tau| Setting::new(0.35, tau as f64, SignalLaw::IidMixture)))
                .build();
            if id == "4c" {
                config.omega_draws = 5;
            }
            config
        }
        "5a" => sensitivity(id, scale, DesignMode::Fixed, &cells, q_grid),
        "5b" => sensitivity(id, scale, DesignMode::Fixed, &cells, vartheta_grid),
        "5c" => sensitivity(id, scale, DesignMode::Fixed, &cells, r_grid),
        "5d" => sensitivity(id, scale, DesignMode::Random, &[(0.35, 2.0), (0.6, 2.0)], |s| {
            let mut v = vartheta_grid(s.clone());
            v.extend(r_grid(s));
            v
        }),
        "6a" | "6b" | "6c" => {
            let base = Setting::new(0.35, tau_from_r(3.0, p), SignalLaw::IidMixture);
            let settings: Vec<Setting> = match id {
                "6a" => T_DEGREES
                    .iter()
                    .map(|&df| Setting { noise: NoiseKind::ScaledT { df }, ..base.clone() })
                    .collect(),
                "6b" => (0..=10)
                    .map(|k| Setting {
                        misspecification: Misspecification::MissingPredictors { eta: 0.02 * k as f64 },
                        ..base.clone()
                    })
                    .collect(),
                _ => (0..=8)
                    .map(|k| Setting {
                        misspecification: Misspecification::Nonlinear { eta: 0.05 * k as f64 },
                        ..base.clone()
                    })
                    .collect(),
            };
            Builder::new(id, scale, DesignMode::Random, OmegaKind::Pentadiag, 40)
                .settings(settings)
                .build()
        }
        other => return Err(SimError::UnknownExperiment(other.to_string())),
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for id in EXPERIMENT_IDS {
            for scale in [Scale::Full, Scale::Reduced] {
                let c = preset(id, scale).unwrap();
                c.validate().unwrap_or_else(|e| panic!("{id}: {e}"));
            }
        }
        assert!(matches!(preset("7", Scale::Full), Err(SimError::UnknownExperiment(_))));
    }

    #[test]
    fn grid_shapes() {
        let e1 = preset("1", Scale::Reduced).unwrap();
        assert_eq!((e1.settings.len(), e1.methods.len(), e1.reps, e1.p), (15, 3, 20, 2000));
        assert_eq!(e1.n(), 1654);
        assert_eq!(preset("1", Scale::Full).unwrap().design, DesignMode::Fixed);
        let e5a = preset("5a", Scale::Full).unwrap();
        assert_eq!(e5a.settings.len(), 24);
        assert_eq!(
            e5a.settings[..6].iter().map(|s| s.q_multiplier).collect::<Vec<_>>(),
            Q_MULTIPLIERS.to_vec()
        );
        assert_eq!(preset("5d", Scale::Full).unwrap().settings.len(), 24);
        assert_eq!(preset("6a", Scale::Full).unwrap().settings.len(), 10);
        assert_eq!(preset("6b", Scale::Full).unwrap().settings.len(), 11);
        assert_eq!(preset("6c", Scale::Full).unwrap().settings.len(), 9);
        assert_eq!(preset("4c", Scale::Full).unwrap().omega_draws, 5);
        assert_eq!(preset("3", Scale::Full).unwrap().settings.len(), 12);
        assert_eq!(preset("2a", Scale::Full).unwrap().settings.len(), 9);
    }
}
