use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pwilm::cli::{exit_code, run, Command};

/// Spatial individual-level epidemic models: simulation, fitting and model comparison.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate an epidemic from [params]
    Simulate(Common),
    /// Fit the model to [data] by MCMC
    Fit(Common),
    /// Recompute summaries and convergence diagnostics from saved draws
    Diagnose(Common),
    /// Compare fitted runs by DIC
    Dic(Common),
    /// Posterior predictive epidemic-curve envelope
    Predict(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML)
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, common) = match args.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Fit(c) => (Command::Fit, c),
        Cmd::Diagnose(c) => (Command::Diagnose, c),
        Cmd::Dic(c) => (Command::Dic, c),
        Cmd::Predict(c) => (Command::Predict, c),
    };
    match run(command, &common.config, common.seed, common.out) {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
