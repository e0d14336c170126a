//! Command-line driver for tuning the tabular MORL solver.
//!
//! Loads TOML run configurations, runs per-seed training on a thread pool,
//! and persists every run artifact (see [`artifacts`] for the layout). The
//! algorithms themselves live in `morltune-core`.

use thiserror::Error;

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod exec;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments.
    #[error("{0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("interrupted")]
    Interrupted,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
            CliError::Interrupted => 130,
        }
    }
}
