//! `siva-id`: run the identification pipeline from a config file, or
//! inspect an emitted artifact.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures inside a pipeline stage.

use clap::{Parser, Subcommand};
use siva::cli::{self, CliError, ExperimentConfig, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "siva-id",
    about = "Nonlinear attachment identification for a cantilever beam",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the pipeline (build → simulate → reduce → identify →
    /// baseline → uq → report), reusing cached stages when possible.
    Run {
        /// Experiment configuration (JSON; empty file = reference defaults)
        #[arg(long)]
        config: PathBuf,
        /// Stop after this stage
        #[arg(long, value_enum, default_value_t = Stage::Report)]
        stage: Stage,
        /// Override the training seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the sparse-regression threshold
        #[arg(long)]
        sindy_threshold: Option<f64>,
    },
    /// Pretty-print a pipeline artifact (.json or .csv)
    Inspect {
        /// Path to the artifact
        artifact: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Run {
            config,
            stage,
            seed,
            out,
            sindy_threshold,
        } => {
            let raw = std::fs::read_to_string(&config).map_err(|e| {
                CliError::Config(format!("cannot read config `{}`: {e}", config.display()))
            })?;
            let mut experiment: ExperimentConfig = cli::validate_config(&raw)?;
            if let Some(seed) = seed {
                experiment.training.seed = seed;
            }
            if let Some(out) = out {
                experiment.output_dir = out;
            }
            if let Some(threshold) = sindy_threshold {
                experiment.sindy_threshold = threshold;
            }
            experiment.validate().map_err(CliError::Config)?;
            let bundle = cli::run_pipeline(&experiment, stage)?;
            print!("{}", cli::summarize_bundle(&bundle));
            println!(
                "artifacts in {}",
                experiment.output_dir.display()
            );
            Ok(())
        }
        Command::Inspect { artifact } => {
            let text = cli::describe_artifact(&artifact)?;
            println!("{text}");
            Ok(())
        }
    }
}
