//! `lurye-ozf`: multiplier search, certificates and loop simulation from JSON configs.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lurye-ozf", version, about = "Zames-Falb multiplier analysis of discrete-time Lurye loops")]
struct Cli {
    /// Analysis config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// LP search for an FIR multiplier.
    Search,
    /// Frequency-domain check of the configured multiplier.
    Verify,
    /// Permutation decomposition of a matrix or periodic operator file.
    Decompose {
        file: PathBuf,
        /// Treat a doubly stochastic matrix as a convex combination of permutations.
        #[arg(long)]
        birkhoff: bool,
    },
    /// Membership of a sequence pair in the periodic banded pair class.
    CheckPair {
        /// Signal file for `v`.
        v: PathBuf,
        /// Signal file for `w`.
        w: PathBuf,
        #[arg(short = 't', long = "period")]
        period: usize,
        #[arg(short = 'b', long = "band")]
        band: usize,
    },
    /// Finite-horizon S-procedure certificate search.
    Certificate,
    /// Simulates the loop and writes a CSV trace.
    Simulate,
    /// Searches for destabilizing nonlinearities.
    Hunt,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input data.
    Usage(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Internal(msg) => f.write_str(msg),
        }
    }
}

impl From<lurye_ozf::Error> for CliError {
    fn from(e: lurye_ozf::Error) -> Self {
        use lurye_ozf::Error::*;
        match e {
            Domain { .. }
            | InconclusiveWinding { .. }
            | DecompositionStalled { .. }
            | LpNumericalFailure { .. }
            | BisectionFailure { .. }
            | EigenNotConverged { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// Command verdicts mapped onto the exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Positive,
    Negative,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LURYE_OZF_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(Verdict::Positive) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(3),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
