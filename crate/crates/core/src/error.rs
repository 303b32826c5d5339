use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the solvers, oracles and data loaders.
#[derive(Debug, Error)]
pub enum ScpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("resource exhausted: {0}")]
    ResourceExhausted(String),

    #[error("unsupported problem: {0}")]
    UnsupportedProblem(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = ScpError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> ScpError {
    ScpError::InvalidArgument(msg.into())
}
