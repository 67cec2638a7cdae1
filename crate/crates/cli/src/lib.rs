//! Command-line front end: `hons <subcommand> --config <path>`.
//!
//! Exit status is 0 on success, 1 on file errors, 2 on invalid input and
//! 3 when a numerical guard aborts the run (boundary contamination,
//! blow-up or an unstable step).

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "hons", version, about = "Higher-order NLS pseudospectral laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    GaugeCheck,
    IdentityCheck,
    Smoothing,
    Persistence,
    Convergence,
    WeightsVerify,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve and tabulate norms of the stored states.
    Simulate(RunArgs),
    /// Compare direct and gauge-conjugated evolution.
    GaugeCheck(RunArgs),
    /// Residuals of the energy identities and the weighted balance.
    IdentityCheck(RunArgs),
    /// Weighted norms that track the gain of regularity.
    Smoothing(RunArgs),
    /// Persistence of weighted norms and the local smoothing integral.
    Persistence(RunArgs),
    /// Observed orders of both stepping schemes.
    Convergence(RunArgs),
    /// Class constants of the configured weights.
    WeightsVerify(RunArgs),
}

impl CommandKind {
    /// Stem of the output file names.
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::GaugeCheck => "gauge-check",
            CommandKind::IdentityCheck => "identity-check",
            CommandKind::Smoothing => "smoothing",
            CommandKind::Persistence => "persistence",
            CommandKind::Convergence => "convergence",
            CommandKind::WeightsVerify => "weights-verify",
        }
    }
}

impl Command {
    pub fn split(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::GaugeCheck(a) => (CommandKind::GaugeCheck, a),
            Command::IdentityCheck(a) => (CommandKind::IdentityCheck, a),
            Command::Smoothing(a) => (CommandKind::Smoothing, a),
            Command::Persistence(a) => (CommandKind::Persistence, a),
            Command::Convergence(a) => (CommandKind::Convergence, a),
            Command::WeightsVerify(a) => (CommandKind::WeightsVerify, a),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Validate and print the resolved plan without computing.
    #[arg(long)]
    pub dry_run: bool,
    /// Overrides `[output] path`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", join_lines(.0))]
    Config(Vec<ConfigError>),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("invalid value of HONS_THREADS: '{0}'")]
    Threads(String),
    #[error(transparent)]
    Numerical(#[from] hons_core::Error),
}

fn join_lines(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(
                hons_core::Error::BoundaryGuard { .. }
                | hons_core::Error::Blowup { .. }
                | hons_core::Error::Stability { .. },
            ) => 3,
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HONS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Threads(raw.clone()))?;
    // a pool installed earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` and runs the selected command; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match configure_threads().and_then(|_| commands::execute(&cli.command)) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
