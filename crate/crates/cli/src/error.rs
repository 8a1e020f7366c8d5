use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ompath_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("failed to encode JSON: {0}")]
    Json(#[from] serde_json::Error),
    /// Outputs were written but at least one optimization did not converge.
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) if e.is_numerical() => exit::NUMERICAL,
            CliError::Core(ompath_core::Error::ConditionViolated(_)) => exit::NUMERICAL,
            CliError::Core(ompath_core::Error::NoConvergence(_)) => exit::NOT_CONVERGED,
            CliError::Core(ompath_core::Error::Io(_)) => exit::IO,
            CliError::Core(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Json(_) => exit::IO,
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
