use std::path::PathBuf;

use crate::numeric::{CheckpointError, NonFiniteGradient, ShapeError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad user input: arguments, empty sentences, unknown task names.
    #[error("input error: {0}")]
    Input(String),
    /// A file was readable but its contents are malformed.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence { epoch: usize, step: usize, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    /// Broken internal invariant, e.g. a token id outside the embedding table.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Format { .. } | Error::Io { .. } => 2,
            Error::Divergence { .. } => 3,
            Error::Checkpoint(_) => 4,
            Error::Shape(_) | Error::Internal(_) => 1,
        }
    }
}

impl From<CheckpointError> for Error {
    fn from(e: CheckpointError) -> Self {
        Error::Checkpoint(e.to_string())
    }
}

impl From<NonFiniteGradient> for Error {
    fn from(e: NonFiniteGradient) -> Self {
        Error::Divergence { epoch: 0, step: 0, detail: e.to_string() }
    }
}
