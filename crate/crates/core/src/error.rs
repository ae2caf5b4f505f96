use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: expected {expected:?}, got {got:?}")]
    Shape {
        layer: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("invalid layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("one-class violation: {0}")]
    OneClass(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
