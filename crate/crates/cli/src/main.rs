use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser, Debug)]
#[command(version, about = "Corrected U/W/V/R covariance tests under spiked alternatives")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for simulations and quadrature.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit centering and scaling constants.
    Calibrate(Common),
    /// Run the four tests on a data matrix.
    Test(Common),
    /// Monte Carlo experiment with distributional summaries.
    Simulate(Common),
    /// Asymptotic power curves over a grid of leading spikes.
    Power(Common),
    /// Compare closed forms against the numerical oracles.
    OracleCheck(Common),
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Compute(String),
    /// Oracle comparisons ran but some failed.
    Check(String),
}

impl From<spikecal::Error> for CliError {
    fn from(e: spikecal::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

fn run(args: Args) -> Result<(), CliError> {
    let (common, cmd): (&Common, fn(&Common) -> Result<(), CliError>) = match &args.command {
        Command::Calibrate(c) => (c, commands::calibrate),
        Command::Test(c) => (c, commands::test),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Power(c) => (c, commands::power),
        Command::OracleCheck(c) => (c, commands::oracle_check),
    };
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Compute(e.to_string()))?;
    }
    std::fs::create_dir_all(&common.out).map_err(|e| {
        CliError::Validation(format!("cannot create {}: {e}", common.out.display()))
    })?;
    cmd(common)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("oracle check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
