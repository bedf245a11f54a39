//! `minset`: analytic charts, unit-manifold training and validation from the
//! command line.
//!
//! Exit codes: 0 success, 1 thresholds unmet, 2 configuration or usage
//! error, 3 numerical divergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "minset", version, about = "Minimal sets of Koopman eigenfunctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in systems and their dimensions.
    ListSystems,
    /// Write split, canonical and flowbox chart grids and their residuals.
    Analyze(Invocation),
    /// Train unit manifolds and write a checkpoint and loss curve.
    Train(Invocation),
    /// Check a trained model on a grid against the pass thresholds.
    Validate(Invocation),
    /// Write a level-set grid of one chart, analytic or learned.
    ExportLevelsets(Invocation),
}

#[derive(Args)]
struct Invocation {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: RunConfig,
}

impl Invocation {
    fn resolve(self) -> Result<RunConfig, Failure> {
        let base = match &self.config {
            Some(path) => RunConfig::read(path)?,
            None => RunConfig::default(),
        };
        Ok(base.overridden_by(self.flags))
    }
}

/// Reasons a command stops short of success.
#[derive(Debug)]
pub enum Failure {
    Unmet(String),
    Usage(String),
    Diverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Unmet(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }
}

impl From<koopman_minset::Error> for Failure {
    fn from(e: koopman_minset::Error) -> Self {
        use koopman_minset::Error;
        match e {
            Error::TrainingDivergence { .. } | Error::Divergence { .. } => Failure::Diverged(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::ListSystems => {
            commands::list_systems();
            Ok(())
        }
        Command::Analyze(inv) => inv.resolve().and_then(|c| commands::analyze(&c)),
        Command::Train(inv) => inv.resolve().and_then(|c| commands::train(&c)),
        Command::Validate(inv) => inv.resolve().and_then(|c| commands::validate(&c)),
        Command::ExportLevelsets(inv) => inv.resolve().and_then(|c| commands::export_levelsets(&c)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Unmet(msg) => eprintln!("thresholds unmet: {msg}"),
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Diverged(msg) => eprintln!("diverged: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
