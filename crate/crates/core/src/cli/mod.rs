//! Command-line front end.

pub mod args;
mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use thiserror::Error;

use args::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECK: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Check(_) => EXIT_CHECK,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nvforge", version, about = "NV-centre ensemble simulation and data reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict ODMR lines and a CW spectrum for a static field
    Odmr(OdmrArgs),
    /// Simulate a coherence decay curve under an OU bath
    Decay(DecayArgs),
    /// Fit a decay model to curve CSV files
    Fit(FitArgs),
    /// Shot-noise DC and AC field sensitivity
    Sense(SenseArgs),
    /// Ion implantation planning and growth nitrogen budget
    Implant {
        #[command(subcommand)]
        command: ImplantCommand,
    },
    /// Reduce confocal maps, depth profiles, spectra and transport data
    Scan(ScanArgs),
    /// Write seeded synthetic data sets
    Fixtures(FixturesArgs),
}

pub fn dispatch(command: Command, seed_env: Option<&str>) -> Result<(), CliError> {
    match command {
        Command::Odmr(a) => commands::odmr(a, seed_env),
        Command::Decay(a) => commands::decay(a, seed_env),
        Command::Fit(a) => commands::fit(a, seed_env),
        Command::Sense(a) => commands::sense(a, seed_env),
        Command::Implant { command: ImplantCommand::Plan(a) } => commands::implant_plan(a, seed_env),
        Command::Implant { command: ImplantCommand::Budget(a) } => commands::implant_budget(a, seed_env),
        Command::Scan(a) => commands::scan(a, seed_env),
        Command::Fixtures(a) => commands::fixtures(a, seed_env),
    }
}

/// Parse `argv`, run, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let seed_env = std::env::var(config::SEED_ENV).ok();
    match dispatch(cli.command, seed_env.as_deref()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("nvforge: {e}");
            e.exit_code()
        }
    }
}
