//! Command-line front end: selection on user data, exponent tables, phase boundaries, simulation
//! suites and correlation matrices.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 algorithmic abort (a retained component
//! larger than the cap, or a subgraph enumeration over its budget), 1 failure writing output.

pub mod args;
mod experiment;
pub mod output;
mod select;
mod tables;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use gscreen::baselines::BaselineError;
use gscreen::exponents::ExponentError;
use gscreen::io::IoError;
use gscreen::model::ModelError;
use gscreen::selector::SelectorError;
use gscreen_simlab::SimError;
use thiserror::Error;

pub use args::Cli;
use args::{Command, SeedArgs};

pub const SEED_ENV: &str = "GS_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] IoError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn selector_exit_code(e: &SelectorError) -> i32 {
    match e {
        SelectorError::Model(_) | SelectorError::SizeMismatch(..) | SelectorError::NotNested => 2,
        _ => 3,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Selector(e) => selector_exit_code(e),
            Self::Simulation(SimError::Selector(e)) => selector_exit_code(e),
            Self::Output { .. } | Self::Csv(_) => 1,
            _ => 2,
        }
    }
}

/// `--seed`, else `$GS_SEED`, else the suite default.
pub fn resolve_seed(args: &SeedArgs) -> Result<u64, CliError> {
    if let Some(seed) = args.seed {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={text:?} is not an unsigned integer"))),
        Err(_) => Ok(gscreen_simlab::presets::DEFAULT_SEED),
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Select(a) => select::run(&a),
        Command::Exponents(a) => tables::exponents(&a),
        Command::Phase(a) => tables::phase(&a),
        Command::Experiment(a) => experiment::run(&a),
        Command::Omega(a) => tables::omega(&a),
    }
}
