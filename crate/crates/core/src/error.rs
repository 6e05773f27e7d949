use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("electrode index {index} out of range for {count} electrodes")]
    ElectrodeIndex { index: usize, count: usize },

    #[error("invalid voltage pattern: {0}")]
    InvalidPattern(String),

    #[error("conductivity must be positive, element {element} has {value}")]
    NonPositiveConductivity { element: usize, value: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("weights must lie in [0, 1] and sum to 1: {0}")]
    Weights(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("not enough usable samples: need {needed}, have {available}")]
    NotEnoughSamples { needed: usize, available: usize },

    #[error("store header mismatch: {0}")]
    StoreMismatch(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
