//! Scenario runner for the `iongate` command-line tool.
//!
//! Reads a TOML scenario, runs one of the tasks (`modes`, `design`, `sweep`,
//! `pulse-train`, `oracle`, `figure`) on top of [`iongate_core`] and writes
//! CSV tables and SVG panels into an output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod plot;
pub mod scenario;
pub mod table;
pub mod tasks;

pub use scenario::{Scenario, Task};
pub use tasks::{run, RunOptions};

use iongate_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CliError {
    pub fn missing(key: &str) -> Self {
        Self::invalid(key, "is required")
    }

    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid { key: key.to_string(), reason: reason.into() }
    }

    /// 2 for bad input, 3 for numerical failures, 1 for IO.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Invalid { .. } | CliError::Schema(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidParameter { .. } | Error::EmptyRange | Error::AxialTwoMode | Error::Domain(_) => 2,
                _ => 3,
            },
            CliError::Io(_) => 1,
        }
    }
}
