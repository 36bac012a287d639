use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplocError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("malformed trajectory {path}: {reason}")]
    Trajectory { path: PathBuf, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate projection: {0}")]
    Degenerate(String),

    #[error("cannot parse {what} from {text:?}: {reason}")]
    Parse {
        what: &'static str,
        text: String,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, SplocError>;

impl SplocError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SplocError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        SplocError::Invalid(msg.into())
    }
}
