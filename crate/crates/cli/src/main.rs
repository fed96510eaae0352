//! `sinai`: check, simulate and search for monotone almost factors from a
//! JSON experiment file.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sinai_core::Error;

/// Exit codes. Every failure path has its own.
pub mod exit {
    pub const OK: u8 = 0;
    /// Bad usage, unreadable or malformed config, IO failure.
    pub const USAGE: u8 = 1;
    pub const PRECONDITION: u8 = 2;
    pub const DEGENERATE: u8 = 3;
    pub const SEARCH_EXHAUSTED: u8 = 4;
    pub const VERIFICATION: u8 = 5;
    pub const BUDGET: u8 = 6;
    pub const INSUFFICIENT_SAMPLES: u8 = 7;
}

#[derive(Debug, Parser)]
#[command(name = "sinai", version, about = "Monotone factors between Bernoulli shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment file (JSON, schema "sinai-experiment/1").
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use exact enumeration where the table budget allows (default).
    #[arg(long, conflicts_with = "sampled")]
    pub exact: bool,
    /// Use Monte Carlo everywhere.
    #[arg(long)]
    pub sampled: bool,
    /// Largest cylinder radius of the weak-star distance.
    #[arg(long)]
    pub imax: Option<usize>,
    /// Monte Carlo sample count; overrides the config.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dominance verdict, entropies and filler gaps.
    Check {
        #[command(flatten)]
        common: Common,
        /// Include a witness coupling as sparse triplets.
        #[arg(long)]
        witness: bool,
    },
    /// Sample the alternating joining over a sweep of block lengths.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Choose parameters, run the star-joining pipeline and report every constraint.
    Factor {
        #[command(flatten)]
        common: Common,
    },
    /// Run a bundled verification suite with fixed seeds.
    Verify {
        /// dist, coupling, star, process, factorlab, empty or all.
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per check.
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Error of a CLI run together with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn io(what: &std::path::Path, e: std::io::Error) -> Self {
        Self::new(exit::USAGE, format!("{}: {e}", what.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) => exit::USAGE,
            Error::InvalidDist(_)
            | Error::AlphabetMismatch { .. }
            | Error::InvalidRelation(_)
            | Error::InvalidCoupling(_)
            | Error::OutOfRange(_)
            | Error::Incomparable(_)
            | Error::Precondition(_) => exit::PRECONDITION,
            Error::Degenerate(_) | Error::NullConditioning(_) => exit::DEGENERATE,
            Error::SearchExhausted(_) => exit::SEARCH_EXHAUSTED,
            Error::Budget { .. } => exit::BUDGET,
            Error::InsufficientSamples(_) => exit::INSUFFICIENT_SAMPLES,
        };
        Self::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Check { common, witness } => commands::check(&common, witness),
        Command::Simulate { common } => commands::simulate(&common),
        Command::Factor { common } => commands::factor(&common),
        Command::Verify { suite, seed, trials } => verify::run(&suite, seed, trials),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
