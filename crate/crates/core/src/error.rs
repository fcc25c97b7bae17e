use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Validation-type errors map to exit code 1 in the CLI, numerical failures
/// (solver breakdown, non-convergence) to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A named structural condition is violated.
    #[error("{condition} violated: {detail}")]
    Validation { condition: String, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Iterative solver breakdown or non-convergence, NaN blow-up, etc.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(condition: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Validation {
            condition: condition.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
