//! Unit-variance noise vectors.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Student t with `df` degrees of freedom divided by its standard deviation √(df/(df−2)).
    ScaledT { df: f64 },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            Self::ScaledT { df } if !(df >= 3.0) => Err(SimError::InvalidParameter(format!(
                "scaled t noise needs df >= 3, got {df}"
            ))),
            _ => Ok(()),
        }
    }
}

pub fn gen_noise<R: Rng + ?Sized>(kind: NoiseKind, n: usize, rng: &mut R) -> Result<DVector<f64>, SimError> {
    kind.validate()?;
    Ok(match kind {
        NoiseKind::Gaussian => DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
        NoiseKind::ScaledT { df } => {
            let t = StudentT::new(df).map_err(|e| SimError::InvalidParameter(e.to_string()))?;
            let scale = (df / (df - 2.0)).sqrt();
            DVector::from_fn(n, |_, _| t.sample(rng) / scale)
        }
    })
}
