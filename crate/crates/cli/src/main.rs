//! Command-line front end wiring the tuning pipeline:
//! `gen -> fit -> optimize-yarn / design-sku / price / flight-analyze`.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, config or input
//! files), 2 runtime error during computation or output emission.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{validation, CliError};

#[derive(Parser, Debug)]
#[command(
    name = "kea-tuner",
    version,
    about = "Cluster configuration tuning from machine-group telemetry",
    long_about = "Fits per-group performance models from telemetry and drives them through \
                  container-limit optimization, machine design simulation, off-peak pricing \
                  scenarios, and flighting analysis. Outputs are CSV/Markdown/JSON files with \
                  deterministic names and contents for a fixed seed.\n\n\
                  The environment variable KEA_TUNER_THREADS bounds worker parallelism \
                  (0 or unset = auto)."
)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. --set pricing.flexible_share=0.4
    /// (repeatable; beats file values).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Seed for stochastic commands; beats the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; beats the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic telemetry dataset and its demand profile.
    Gen,
    /// Fit per-group performance and resource models from telemetry.
    Fit,
    /// Propose per-group container limits under the latency constraint.
    OptimizeYarn,
    /// Pick SSD/RAM sizes for future machines by cost simulation.
    DesignSku,
    /// Evaluate the discount/oversubscription scenario grid.
    Price,
    /// Assign experiment groups and compare their throughput metrics.
    FlightAnalyze,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KEA_TUNER_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        validation(anyhow::anyhow!(
            "KEA_TUNER_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| validation(anyhow::anyhow!("cannot build thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<String, CliError> {
    configure_threads()?;
    let config = config::load_config(
        cli.config.as_deref(),
        &cli.set,
        cli.seed,
        cli.out.as_deref(),
    )
    .map_err(validation)?;
    match cli.command {
        Command::Gen => commands::gen(&config),
        Command::Fit => commands::fit(&config),
        Command::OptimizeYarn => commands::optimize_yarn(&config),
        Command::DesignSku => commands::design_sku(&config),
        Command::Price => commands::price(&config),
        Command::FlightAnalyze => commands::flight_analyze(&config),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
        }
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            std::process::exit(e.code);
        }
    }
}
