//! `activenet`: batch pipeline from raw tweets and follow edges to
//! activity-thresholded network metrics, tail fits and regressions.
//!
//! Exit codes: 0 success, 1 analysis error, 2 input error.

mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use activenet::par;
use clap::{Parser, Subcommand};

use commands::Command;
use config::{Flags, PipelineConfig};
use error::CliError;
use manifest::Recorder;

#[derive(Debug, Parser)]
#[command(name = "activenet", version, about = "Activity-thresholded follower network analysis")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Filter tweets and count relevant tweets per user (activity.csv).
    Ingest,
    /// Graph summaries over a list of AF thresholds (sweep.csv).
    Sweep,
    /// Node metrics, tail fits and regressions for one threshold.
    Analyze,
    /// Heavy-tail fits for one column of a metrics CSV.
    FitDist,
    /// Tobit and univariate fits on a metrics CSV.
    Regress,
    /// Edge list of the thresholded subgraph.
    ExportEdges,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Ingest => Command::Ingest,
            Cmd::Sweep => Command::Sweep,
            Cmd::Analyze => Command::Analyze,
            Cmd::FitDist => Command::FitDist,
            Cmd::Regress => Command::Regress,
            Cmd::ExportEdges => Command::ExportEdges,
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(&cli.flags)?;
    let cmd = Command::from(cli.command);
    let mut rec = Recorder::new(cmd.name(), &cfg)?;
    let outcome = par::with_threads(cfg.threads, || commands::run(cmd, &cfg, &mut rec));
    rec.finish(&outcome)?;
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
