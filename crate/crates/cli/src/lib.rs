//! Implementation of the `agebid` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "agebid",
    version,
    about = "Optimal bidding when value grows with the time since the last win"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal value and bid; writes policy.csv and solve.json.
    Solve(CommonArgs),
    /// Simulate optimal and greedy bidding over the configured grid; writes table1.csv.
    Table1(CommonArgs),
    /// Evaluate shading factors; writes shading.csv and shading_ratio.csv.
    Shading(CommonArgs),
    /// Small-value regret slope and finite-rate gaps; writes asymptotics.json.
    Asymptotics(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulation seed (overrides `sim.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation replications (overrides `sim.n_reps`).
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<agebid::Error> for CliError {
    fn from(e: agebid::Error) -> Self {
        match e {
            agebid::Error::Io(m) => CliError::Io(m),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

/// Loads the configuration, applies overrides and runs the command.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (args, which) = match &cli.command {
        Command::Solve(a) => (a, commands::Which::Solve),
        Command::Table1(a) => (a, commands::Which::Table1),
        Command::Shading(a) => (a, commands::Which::Shading),
        Command::Asymptotics(a) => (a, commands::Which::Asymptotics),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.sim.n_reps = reps;
    }
    cfg.validate()?;
    commands::dispatch(which, &cfg)
}

/// Caps the worker pool at `AGEBID_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("AGEBID_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("AGEBID_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}
