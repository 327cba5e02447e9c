//! Departures from the linear model: dropped true predictors and nonlinear effects.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Misspecification {
    #[default]
    None,
    /// Each true predictor is hidden from the methods with probability `eta`.
    MissingPredictors { eta: f64 },
    /// Each true predictor enters the response through a nonlinear transform with probability
    /// `eta`; half of those through `sgn(x)x²`, half through `exp(√n x)`.
    Nonlinear { eta: f64 },
}

impl Misspecification {
    pub fn eta(&self) -> Option<f64> {
        match *self {
            Self::None => None,
            Self::MissingPredictors { eta } | Self::Nonlinear { eta } => Some(eta),
        }
    }
}

/// What the methods see, and the truth they are scored against.
#[derive(Debug, Clone)]
pub struct Observed {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// True coefficients of the visible columns.
    pub truth: DVector<f64>,
    /// Original indices of the visible columns.
    pub visible: Vec<usize>,
}

/// Centers `g` and scales it to unit Euclidean norm, i.e. empirical variance 1/n.
fn standardize(mut g: DVector<f64>, center: bool) -> DVector<f64> {
    let mean = g.mean();
    let spread = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    if center {
        g.add_scalar_mut(-mean);
    }
    if spread > 0.0 {
        g /= spread;
    }
    g
}

pub fn apply_misspecification<R: Rng + ?Sized>(
    kind: Misspecification,
    x: DMatrix<f64>,
    beta: &DVector<f64>,
    noise: &DVector<f64>,
    rng: &mut R,
) -> Result<Observed, SimError> {
    if let Some(eta) = kind.eta() {
        if !(0.0..=1.0).contains(&eta) {
            return Err(SimError::InvalidParameter(format!("eta = {eta} is outside [0, 1]")));
        }
    }
    let p = x.ncols();
    let support: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    match kind {
        Misspecification::None => {
            let y = &x * beta + noise;
            Ok(Observed {
                x,
                y,
                truth: beta.clone(),
                visible: (0..p).collect(),
            })
        }
        Misspecification::MissingPredictors { eta } => {
            let y = &x * beta + noise;
            let mut hidden = vec![false; p];
            for &j in &support {
                hidden[j] = rng.random::<f64>() < eta;
            }
            let visible: Vec<usize> = (0..p).filter(|&j| !hidden[j]).collect();
            Ok(Observed {
                x: x.select_columns(visible.iter()),
                y,
                truth: DVector::from_iterator(visible.len(), visible.iter().map(|&j| beta[j])),
                visible,
            })
        }
        Misspecification::Nonlinear { eta } => {
            let mut nonlinear: Vec<usize> =
                support.iter().copied().filter(|_| rng.random::<f64>() < eta).collect();
            nonlinear.shuffle(rng);
            let (squared, exponential) = nonlinear.split_at(nonlinear.len() / 2);
            let root_n = (x.nrows() as f64).sqrt();
            let mut linear = beta.clone();
            for &j in &nonlinear {
                linear[j] = 0.0;
            }
            let mut y = &x * &linear + noise;
            for &j in &nonlinear {
                let col = x.column(j).into_owned();
                let effect = if squared.contains(&j) {
                    standardize(col.map(|v| v.signum() * v * v), false)
                } else {
                    debug_assert!(exponential.contains(&j));
                    standardize(col.map(|v| (root_n * v).exp()), true)
                };
                y.axpy(beta[j], &effect, 1.0);
            }
            Ok(Observed {
                x,
                y,
                truth: beta.clone(),
                visible: (0..p).collect(),
            })
        }
    }
}
