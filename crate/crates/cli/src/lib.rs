//! Scenario runner for the `perpetua` command line tool.
//!
//! A run resolves a [`Scenario`](scenario::Scenario) from flags, an optional
//! JSON file and defaults, dispatches one experiment and appends JSONL
//! [`Record`](record::Record)s. `verify` runs fixed-seed check suites and
//! `report` turns JSONL back into CSV tables and SVG plots.

pub mod experiments;
pub mod record;
pub mod report;
pub mod scenario;
pub mod suites;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("law and experiment are incompatible: {0}")]
    Incompatible(String),

    #[error("{0} check(s) failed")]
    Failed(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for incompatibility,
    /// 1 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Incompatible(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
