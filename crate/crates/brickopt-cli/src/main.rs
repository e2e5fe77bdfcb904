//! Experiment runner: builds references, initializes and optimizes
//! brickwall circuits, and emits machine-readable results.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

/// Exit codes: 0 success, 2 configuration error, 3 resource guard,
/// 4 numerical failure.
const EXIT_CONFIG: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "brickopt",
    about = "Brickwall circuit compression runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (defaults to $BRICKOPT_OUT_ROOT or ./brickopt-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the run seed(s) with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for independent (seed, layers) runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Validate and echo the configuration without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the reference MPO and report its error budget.
    BuildRef,
    /// Full pipeline: reference, initialization, optimization, records.
    Optimize,
    /// Cost-versus-timestep scaling study with log-log slope fits.
    Scaling,
    /// Run the Riemannian and local-sweep optimizers side by side.
    CompareMethods,
    /// Parse and validate the configuration, then echo it.
    ValidateConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:?}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    if let Some(lib) = err.downcast_ref::<brickopt::Error>() {
        return match lib {
            brickopt::Error::ResourceGuard(_) => EXIT_RESOURCE,
            brickopt::Error::Param(_) | brickopt::Error::Format(_) => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        };
    }
    EXIT_CONFIG
}

fn dispatch(cli: &Cli) -> Result<()> {
    brickopt::linalg::set_sequential_backend();
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let config = ExperimentConfig::load(config_path)?;
    let ctx = runner::RunContext::new(&config, cli.out.clone(), cli.seed, cli.threads)?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&config)?);
        println!(
            "config-hash: {:016x}",
            config::config_hash(&config, cli.seed)
        );
        return Ok(());
    }
    match cli.command {
        Command::ValidateConfig => {
            println!("{}", serde_json::to_string_pretty(&config)?);
            println!(
                "config-hash: {:016x}",
                config::config_hash(&config, cli.seed)
            );
            Ok(())
        }
        Command::BuildRef => runner::cmd_build_ref(&config, &ctx),
        Command::Optimize => runner::cmd_optimize(&config, &ctx),
        Command::Scaling => runner::cmd_scaling(&config, &ctx),
        Command::CompareMethods => runner::cmd_compare_methods(&config, &ctx),
    }
}
