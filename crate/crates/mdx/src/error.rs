use std::path::Path;

use thiserror::Error;

/// Failure of a pipeline command, classified by exit code.
#[derive(Debug, Error)]
pub enum MdxError {
    /// Bad command line or configuration (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable or invalid input data (exit 2).
    #[error("{0}")]
    Data(String),
    /// Anything else (exit 3).
    #[error("{0}")]
    Internal(String),
}

impl MdxError {
    pub fn exit_code(&self) -> i32 {
        match self {
            MdxError::Usage(_) => 1,
            MdxError::Data(_) => 2,
            MdxError::Internal(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        MdxError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        MdxError::Data(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        MdxError::Internal(msg.into())
    }

    /// Data error prefixed with the offending path.
    pub fn at(path: &Path, err: impl std::fmt::Display) -> Self {
        MdxError::Data(format!("{}: {err}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, MdxError>;

/// Writing outputs failed: an environment problem, not bad input.
pub(crate) fn write_err(path: &Path, err: impl std::fmt::Display) -> MdxError {
    MdxError::Internal(format!("cannot write {}: {err}", path.display()))
}
