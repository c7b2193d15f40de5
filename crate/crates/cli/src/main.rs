//! `cyclid` command-line tool: simulate periodic plants, identify them from
//! data, verify structural properties and reproduce the reference experiments.

mod identify;
mod reproduce;
mod simulate;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cyclid::{ErrorClass, LptvModel};

/// Exit codes, one per error class.
pub mod exit {
    pub const ARGUMENT: u8 = 2;
    pub const IO: u8 = 3;
    pub const VALIDATION: u8 = 4;
    pub const IDENTIFICATION: u8 = 5;
    pub const STRUCTURE: u8 = 6;
    pub const REPRODUCTION: u8 = 7;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cyclid::Error),
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Structure(String),
    #[error("{0}")]
    Reproduction(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Argument(_) => exit::ARGUMENT,
            CliError::Structure(_) => exit::STRUCTURE,
            CliError::Reproduction(_) => exit::REPRODUCTION,
            CliError::Core(e) => match e.class() {
                ErrorClass::Argument => exit::ARGUMENT,
                ErrorClass::Io => exit::IO,
                ErrorClass::Validation => exit::VALIDATION,
                ErrorClass::Identification => exit::IDENTIFICATION,
                ErrorClass::Structure => exit::STRUCTURE,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cyclid", version, about = "Identify linear periodically time-varying systems via cyclic reformulation")]
#[command(after_help = "Exit codes: 0 success, 2 argument, 3 I/O or file format, 4 validation, \
5 identification, 6 structure check, 7 reproduction assertion.\nSet CYCLID_LOG=info (or debug) for progress messages.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a periodic plant and write its input/output as CSV.
    Simulate(simulate::Args),
    /// Identify a periodic model from input/output CSV files.
    Identify(identify::Args),
    /// Check the structural properties of a periodic model or an identified LTI quadruple.
    Verify(verify::Args),
    /// Re-run a reference experiment on the built-in example plant.
    Reproduce(reproduce::Args),
}

/// `pex` (the built-in example plant) or a path to a model JSON file.
pub fn load_model(source: &str) -> CliResult<LptvModel<f64>> {
    if source == "pex" {
        return Ok(LptvModel::pex());
    }
    Ok(cyclid::io::read_model(Path::new(source))?)
}

pub fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CYCLID_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Identify(a) => identify::run(&a),
        Command::Verify(a) => verify::run(&a),
        Command::Reproduce(a) => reproduce::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
