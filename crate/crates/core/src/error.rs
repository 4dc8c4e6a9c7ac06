use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid action set: {0}")]
    InvalidActions(String),
    #[error("invalid value scores: {0}")]
    InvalidScores(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("Cholesky factorization failed after raising jitter to {jitter:e}")]
    Cholesky { jitter: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("agent is frozen; observations are not accepted")]
    Frozen,
    #[error("no actions available to choose from")]
    EmptyChoice,
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for errors caused by bad input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Eigen(_) | Error::Cholesky { .. } | Error::Singular(_) | Error::Io { .. }
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
