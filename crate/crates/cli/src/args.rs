use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gscreen", version, about = "Graphlet screening for rare and weak signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run variable selection on a design file.
    Select(SelectArgs),
    /// Block-design exponents of graphlet screening, subset selection and the lasso.
    Exponents(ExponentArgs),
    /// Phase boundary r(ϑ) where an exponent crosses 1.
    Phase(PhaseArgs),
    /// Run a simulation suite.
    Experiment(ExperimentArgs),
    /// Write a correlation matrix from one of the benchmark families.
    Omega(OmegaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gs,
    Ups,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QRuleArg {
    Max,
    Conservative,
    Fixed,
}

/// Tuning overrides shared by `select` and `experiment`.
#[derive(Debug, Clone, Default, Args)]
pub struct TuningArgs {
    /// Largest screened subgraph.
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long, value_enum)]
    pub q_rule: Option<QRuleArg>,
    /// Floor of the screening constant q.
    #[arg(long)]
    pub q0: Option<f64>,
    /// Screening passes (1 to 5).
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Base seed; falls back to $GS_SEED, then to a fixed default.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// Design as CSV (response in the last column) or GSX1 binary.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, value_enum, default_value = "gs")]
    pub method: MethodArg,
    /// Noise level.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sparsity exponent ϑ; with --r determines the default tuning.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Strength exponent r.
    #[arg(long)]
    pub r: Option<f64>,
    /// Cleaning penalty u; with --v replaces (ϑ, r).
    #[arg(long)]
    pub u: Option<f64>,
    /// Cleaning magnitude floor v.
    #[arg(long)]
    pub v: Option<f64>,
    /// Constant screening q; implies --q-rule fixed.
    #[arg(long)]
    pub q: Option<f64>,
    /// Gram threshold for the dependence graph; defaults to 1/ln p.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Largest retained component cleaned exhaustively (1 to 30).
    #[arg(long)]
    pub component_cap: Option<usize>,
    /// Lasso penalty; defaults to σ√(2 ln p).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Rescale columns to unit norm instead of requiring it.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExponentArgs {
    /// The eight standard (ϑ, r, h0) columns.
    #[arg(long)]
    pub table1: bool,
    /// A triple `theta,r,h0`; repeatable.
    #[arg(long, value_name = "THETA,R,H0")]
    pub triple: Vec<String>,
    /// CSV of triples with columns theta, r, h0.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Writes exponents.csv here instead of standard output.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExponentMethodArg {
    Gs,
    Ss,
    Lasso,
    Universal,
}

#[derive(Debug, Clone, Args)]
pub struct PhaseArgs {
    #[arg(long, value_enum, default_value = "gs")]
    pub method: ExponentMethodArg,
    /// Off-diagonal of the 2×2 blocks.
    #[arg(long, default_value_t = 0.0)]
    pub h0: f64,
    /// ϑ grid points, evenly spaced inside (0, 1).
    #[arg(long, default_value_t = 99)]
    pub points: usize,
    /// Writes phase.csv here instead of standard output.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Preset id (1, 2a, 2b, 3, 4a, 4b, 4c, 5a, 5b, 5c, 5d, 6a, 6b, 6c).
    pub id: Option<String>,
    /// JSON experiment configuration instead of a preset.
    #[arg(long, conflicts_with = "id")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Desk scale: p = 2000 and 20 replications.
    #[arg(long)]
    pub reduced: bool,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Restrict the compared methods.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<MethodArg>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OmegaKindArg {
    Identity,
    Block2,
    Block4,
    Tridiag,
    Pentadiag,
    RandomSparse,
}

#[derive(Debug, Clone, Args)]
pub struct OmegaArgs {
    #[arg(long, value_enum)]
    pub kind: OmegaKindArg,
    #[arg(long)]
    pub p: usize,
    /// Off-diagonal magnitude of the 2×2 blocks.
    #[arg(long, default_value_t = 0.5)]
    pub h0: f64,
    /// Expected nonzeros per row of the random sparse kind.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Row-sum bound of the random sparse kind.
    #[arg(long, default_value_t = 0.7)]
    pub a: f64,
    /// Writes omega.csv here instead of standard output.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArgs,
}
