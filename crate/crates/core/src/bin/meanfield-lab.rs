use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanfield_core::lab::{self, ExperimentConfig, ExperimentKind};
use meanfield_core::Error;

/// Run particle, kinetic and hydrodynamic experiments from a TOML config.
///
/// Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.
#[derive(Parser)]
#[command(name = "meanfield-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run { config: PathBuf },
    /// Parse and check the config without running anything.
    Validate { config: PathBuf },
    /// Run the config as a convergence-rate study.
    RateStudy { config: PathBuf },
    /// Run the config as a pressure sweep.
    EpsSweep { config: PathBuf },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn load(path: &PathBuf, force: Option<ExperimentKind>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(kind) = force {
        cfg.experiment = kind;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => load(&config, None).and_then(|cfg| {
            cfg.validate()?;
            lab::thread_count(&cfg)?;
            println!("{}: ok ({})", config.display(), cfg.experiment.name());
            Ok(())
        }),
        Command::Run { config } => load(&config, None).and_then(|c| lab::run(&c)).map(report),
        Command::RateStudy { config } => load(&config, Some(ExperimentKind::RateStudy)).and_then(|c| lab::run(&c)).map(report),
        Command::EpsSweep { config } => load(&config, Some(ExperimentKind::EpsSweep)).and_then(|c| lab::run(&c)).map(report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn report(outcome: lab::RunOutcome) {
    println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));
    eprintln!("wrote {} files to {}", outcome.files.len() + 1, outcome.output_dir.display());
}
