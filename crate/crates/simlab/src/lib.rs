//! Simulation laboratory: data generators, replication runner and the benchmark presets.

pub mod design;
pub mod experiment;
pub mod metrics;
pub mod misspec;
pub mod noise;
pub mod omega;
pub mod presets;
pub mod signal;

use gscreen::baselines::BaselineError;
use gscreen::graphs::GraphError;
use gscreen::model::ModelError;
use gscreen::selector::SelectorError;
use thiserror::Error;

pub use experiment::{run_experiment, ExperimentConfig, HammingReport, Method, Setting};
pub use presets::{preset, Scale, EXPERIMENT_IDS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("unknown experiment id {0:?}")]
    UnknownExperiment(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one random stream, a pure function of its coordinates so that results do not
/// depend on scheduling.
pub fn derive_seed(base: u64, stream: u64, index: u64, rep: u64) -> u64 {
    mix(mix(mix(base ^ mix(stream)) ^ index) ^ rep)
}
