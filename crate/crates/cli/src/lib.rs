//! `circadian` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 analysis
//! negative (conditions violated, spiderweb not converging), 3 numerical
//! failure.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;

use circadian_core::{CharacteristicError, IntegrateError, SmallGainError};
use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{run, Outputs};
pub use config::{parse_config, Flags, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<SmallGainError> for CliError {
    fn from(e: SmallGainError) -> Self {
        match e {
            SmallGainError::EmptySeeds | SmallGainError::InvalidArgument(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::Usage(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CharacteristicError> for CliError {
    fn from(e: CharacteristicError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

/// Outcome of a run that completed without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// The analysis answered "no": conditions fail or the iteration cycles.
    Negative,
    /// Spiderweb hit the iteration cap without a verdict.
    Undecided,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Negative => 2,
            Status::Undecided => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the stability hypotheses and state-space constraints.
    Check,
    /// Tabulate a subsystem characteristic (`--system mrna|per`).
    Char,
    /// Iterate the composed characteristic.
    Spiderweb,
    /// Closed-loop equilibrium by bisection.
    Equilibrium,
    /// Simulate the closed loop (`--mode ode|dde`).
    Simulate,
    /// Classify a grid of (vs, delay) points.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "circadian", version, about = "Small-gain analysis of Goldbeter's circadian oscillator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = parse_config(cli.flags.config.as_deref(), &cli.flags).and_then(|cfg| {
        let outputs = Outputs::from_flags(&cli.flags);
        run(cli.command, &cfg, &outputs, stdout, stderr)
    });
    match result {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
