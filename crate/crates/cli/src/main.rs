mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{load_file, resolve_common, Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] delsub::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether every check in a run held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Violation,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let file = load_file(cli.common.config.as_deref())?;
    let common = resolve_common(&cli.common, &file)?;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Bounds(args) => commands::bounds(&common, &args, &file.bounds),
        Command::Verify(args) => commands::verify(&common, &args, &file.verify),
        Command::Decode(args) => commands::decode(&common, &args, &file.decode),
        Command::Concentration(args) => commands::concentration(&common, &args, &file.concentration),
        Command::Decompose(args) => commands::decompose(&common, &args, &file.decompose),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("delsub: {e}");
            ExitCode::from(2)
        }
    }
}
