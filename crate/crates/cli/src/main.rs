use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Sparse Bayesian identification of dynamic systems.
#[derive(Parser)]
#[command(name = "bayesid", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config and write its artifacts.
    Run {
        /// Experiment configuration file.
        config: PathBuf,
    },
    /// List config violations without running anything.
    Validate {
        /// Experiment configuration file.
        config: PathBuf,
    },
    /// Summarise finished reports in one table, best RMSE first.
    Compare {
        /// One or more report.json files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Re-simulate a saved model over a configured dataset.
    Simulate {
        /// best_model.json snapshot from a finished run.
        #[arg(long)]
        model: PathBuf,
        /// Experiment configuration naming the dataset and lags.
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => bayesid_cli::runner::run(&config),
        Command::Validate { config } => bayesid_cli::runner::validate(&config),
        Command::Compare { reports } => bayesid_cli::runner::compare(&reports).map(|table| {
            print!("{table}");
            0
        }),
        Command::Simulate { model, config } => bayesid_cli::runner::simulate(&model, &config),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
