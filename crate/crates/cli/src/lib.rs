//! Command-line front end for the step-noise survival engine: configuration,
//! telemetry ingestion and the `estimate`, `simulate`, `verify` and
//! `stepcompare` pipelines.

pub mod commands;
pub mod config;
pub mod report;
pub mod synth;
pub mod telemetry;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("verification failed:\n{0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Nine significant digits, scientific notation.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}
