//! Batch validation runs: configuration, orchestration and report output.

pub mod config;
pub mod output;
pub mod plots;
pub mod report;

use std::path::PathBuf;

pub use config::{ConfigFile, Overrides, ValidationConfig, Validator};
pub use report::{run_validation, ReportBundle, Warning};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{validator} validator failed: {source}")]
    Validator {
        validator: Validator,
        #[source]
        source: scenval::Error,
    },

    #[error(transparent)]
    Data(#[from] scenval::Error),

    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit code: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(e) | CliError::Validator { source: e, .. } => match e {
                scenval::Error::InvalidConfig(_) => 1,
                _ => 2,
            },
            CliError::Output { .. } => 3,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
