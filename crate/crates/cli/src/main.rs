//! `iwp`: synthetic drop-down experiments and observer runs over measurement
//! files. Exit codes: 0 ok, 2 input error, 3 numerical failure.

mod commands;
mod config;
mod csvio;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Overrides;
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "iwp", version, about = "Inertia wheel pendulum simulator and observer harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment config (TOML with dotted keys)
    #[arg(long)]
    config: PathBuf,
    /// Measurement CSV with columns t,y,u (overrides io.measurements)
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Output directory (overrides io.out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed (overrides sim.seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the drop-down experiment; writes trace.csv and measurements.csv
    Simulate(Common),
    /// Run the configured observer with model selection over a measurement file
    Estimate(Common),
    /// Run all three observers over the same measurement file
    Compare(Common),
}

type CommandFn = fn(&ExperimentConfig, &Overrides) -> Result<Vec<PathBuf>, CliError>;

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, f): (_, CommandFn) = match cli.command {
        Command::Simulate(c) => (c, commands::cmd_simulate),
        Command::Estimate(c) => (c, commands::cmd_estimate),
        Command::Compare(c) => (c, commands::cmd_compare),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    let ov = Overrides { measurements: common.measurements, out: common.out, seed: common.seed };
    f(&cfg, &ov)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
