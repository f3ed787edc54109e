use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hfo_cli::commands::{cmd_robustness, cmd_simulate, cmd_verify, Which, DEFAULT_DELTAS, DEFAULT_TAU};
use hfo_cli::config::{seed_from_env, Loaded, ScenarioConfig};
use hfo_cli::CliError;

/// Simulate and verify sampled-data feedback optimization as a hybrid system.
#[derive(Parser)]
#[command(name = "hfo", version)]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory.csv and report.json.
    Simulate { config: PathBuf },
    /// Run the bound, contraction, reconstruction and non-Zeno checks; writes verify.json.
    Verify {
        config: PathBuf,
        /// Which convergence bound to check.
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
    },
    /// Sweep the perturbation scale and measure closeness to the nominal run.
    Robustness {
        config: PathBuf,
        /// Comma-separated perturbation scales.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DELTAS)]
        deltas: Vec<f64>,
        /// Hybrid-time window t + j <= tau over which closeness is measured.
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    ScenarioConfig::load(path)?.resolve(seed_from_env()?)
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Simulate { config } => cmd_simulate(&load(config)?, &cli.out),
        Command::Verify { config, which } => cmd_verify(&load(config)?, *which, &cli.out),
        Command::Robustness { config, deltas, tau } => cmd_robustness(&load(config)?, deltas, *tau, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
