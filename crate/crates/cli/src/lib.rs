//! Command-line frontend: loads a scenario config, runs simulations,
//! verification checks and robustness sweeps, and writes CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure categories, each mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// A check ran and failed.
    Verification(String),
    /// Unreadable or malformed input.
    Input(String),
    /// Well-formed input that violates a standing assumption.
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) | CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Validation(m) => write!(f, "validation failed:\n{m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<hfo::hybrid::HybridError> for CliError {
    fn from(e: hfo::hybrid::HybridError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<hfo::model::ModelError> for CliError {
    fn from(e: hfo::model::ModelError) -> Self {
        CliError::Runtime(e.to_string())
    }
}
