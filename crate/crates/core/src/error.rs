use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wav decode error at byte offset {offset}: {msg}")]
    Decode { offset: usize, msg: String },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {dim}: expected {expected}, got {actual}")]
    Shape {
        dim: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("manifest error in {path} at row {row}: {msg}")]
    Manifest {
        path: PathBuf,
        row: usize,
        msg: String,
    },

    #[error("missing path: {0}")]
    MissingPath(PathBuf),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
