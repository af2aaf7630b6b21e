//! Experiment pipelines around `dyncopy-core`: config parsing, data
//! ingestion (IDX images, light-curve CSV), and the five experiment
//! drivers behind the `dyncopy` binary.

pub mod config;
pub mod experiments;
pub mod idx;
pub mod lightcurve;

use std::fmt;

/// CLI-level error: configuration problems wrap core errors with context.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(dyncopy_core::Error),
    Io(std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(err) => err.fmt(f),
            CliError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dyncopy_core::Error> for CliError {
    fn from(err: dyncopy_core::Error) -> Self {
        CliError::Core(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err)
    }
}
