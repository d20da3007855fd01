//! Command-line driver: `rmtkd train|spectrum|compress|ablate --config <path>`.
//!
//! Every command validates the whole configuration before doing any work,
//! computes all outputs in memory and then publishes them atomically.
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.

mod commands;
pub mod config;
mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use commands::{execute, Invocation};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Warm-up training; writes model.rmtk, train_log.csv, network.json.
    Train,
    /// Eigenvalue spectrum and MP fit for one layer on the calibration split.
    Spectrum,
    /// Warm-up training followed by the compression loop.
    Compress,
    /// Quantile sweep of the compression loop.
    Ablate,
}

#[derive(Debug, Parser)]
#[command(name = "rmtkd", version, about = "Spectral layer reduction with self-distillation")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated grid for `ablate`, or a single quantile for `spectrum`.
    #[arg(long)]
    pub quantiles: Option<String>,
    /// Hidden layer id for `spectrum`.
    #[arg(long)]
    pub layer: Option<usize>,
}

/// Parse, validate and run. Returns the paths written.
pub fn run(args: Args) -> Result<Vec<PathBuf>, CliError> {
    let invocation = Invocation::from_args(args)?;
    execute(&invocation)
}
