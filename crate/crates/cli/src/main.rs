//! Batch front end: parse a model config, run solvers and analyses, emit
//! CSV/JSON artifacts. Exit codes: 0 on success, 1 on comparison failure or
//! runtime error, 2 on configuration errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    CompareFailed(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

#[derive(Parser)]
#[command(
    name = "recombinator",
    version,
    about = "Exact trajectories and linkage disequilibria of single-crossover \
             mutation-recombination-selection dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Model configuration file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out: PathBuf,

    /// Override the oracle step size from the config.
    #[arg(long, global = true, value_name = "FLOAT")]
    dt: Option<f64>,

    /// Pass threshold for `compare`.
    #[arg(long, global = true, default_value_t = 1e-6, value_name = "FLOAT")]
    threshold: f64,

    /// Override the random seed from the config.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form solution over the time grid.
    Solve,
    /// Integrate the dynamics with fixed-step RK4 over the same grid.
    Integrate,
    /// Compare the closed form against the RK4 oracle and report per-time
    /// deviations.
    Compare,
    /// Export the linkage disequilibria of every contiguous site span.
    Ld,
    /// Compute the product-form equilibrium and its stationarity residual.
    Equilibrium,
    /// Iterate the discrete-time single-crossover map.
    Discrete,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_line: String = std::env::args().collect::<Vec<_>>().join(" ");
    match run(cli, &command_line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::CompareFailed(msg)) => {
            eprintln!("comparison failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli, command_line: &str) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let run_config =
        config::parse_config(&text, Overrides { dt: cli.dt, seed: cli.seed })?;

    match cli.command {
        Command::Solve => commands::run_solve(&run_config, &cli.out, command_line),
        Command::Integrate => commands::run_integrate(&run_config, &cli.out, command_line),
        Command::Compare => {
            commands::run_compare(&run_config, &cli.out, command_line, cli.threshold)
        }
        Command::Ld => commands::run_ld(&run_config, &cli.out, command_line),
        Command::Equilibrium => commands::run_equilibrium(&run_config, &cli.out, command_line),
        Command::Discrete => commands::run_discrete(&run_config, &cli.out, command_line),
    }
}
