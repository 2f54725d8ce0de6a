//! `lockstack`: experiment harness for predictive-score model combination.

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for configuration, input or I/O errors.
pub const EXIT_ERROR: u8 = 1;
/// Exit status when a computed result violates a mathematical invariant.
pub const EXIT_INVARIANT: u8 = 2;
/// Exit status when some replications failed (partial results are kept).
pub const EXIT_PARTIAL: u8 = 3;

pub const DEFAULT_SEED: u64 = 20240101;

#[derive(Debug, Parser)]
#[command(name = "lockstack", version, about = "Combine Bayesian predictive distributions by score-matched pooling")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// TOML file with command settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Use leave-one-out score estimates (the default).
    #[arg(long, global = true, conflicts_with = "insample")]
    pub loo: bool,
    /// Use in-sample score estimates.
    #[arg(long, global = true)]
    pub insample: bool,
    /// Resolve and validate the configuration, then exit without computing.
    #[arg(long, global = true)]
    pub dry_run: bool,
}

impl Global {
    pub fn loo_override(&self) -> Option<bool> {
        match (self.loo, self.insample) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare seven combination methods on the non-nested normal scenarios.
    Nonnested(commands::NonnestedArgs),
    /// In-sample versus leave-one-out scores as regression size grows.
    Overfit(commands::OverfitArgs),
    /// Tabulate mixture, locking and superposition of two densities.
    DemoOperators(commands::DemoArgs),
    /// Importance-sample a locked predictive.
    SampleLocked(commands::SampleArgs),
    /// Fit combination weights from an evaluation-table CSV.
    Score(commands::ScoreArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
