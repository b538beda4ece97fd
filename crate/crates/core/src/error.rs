use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "kernel numerically singular: lambda_min estimate {lambda_min:.3e} \
         not factorizable after jitter up to {max_jitter:.3e}"
    )]
    SingularKernel { lambda_min: f64, max_jitter: f64 },

    #[error("model is not fitted")]
    UnfittedModel,

    #[error("activation must be even for the NTK model (got {0}); see the allow-uneven escape hatch")]
    UnevenActivation(String),

    #[error("estimator/provenance mismatch: {0}")]
    EstimatorMismatch(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("not enough samples: {0}")]
    InsufficientSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
