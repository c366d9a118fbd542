//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented domain (e.g. non-positive angular spread).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix or vector dimensions do not match the system configuration.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed (factorization, PSD check, ...). The message
    /// carries diagnostics about the offending matrix.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A function was evaluated outside its domain (e.g. log-det of a singular matrix).
    #[error("domain error: {0}")]
    Domain(String),

    /// A solver was started from an infeasible point.
    #[error("infeasible starting point: {0}")]
    Infeasible(String),

    /// Experiment configuration rejected by validation.
    #[error("config error: {0}")]
    Config(String),

    /// I/O failure, annotated with the path involved.
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
