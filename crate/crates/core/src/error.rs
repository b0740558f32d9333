use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The variants are grouped by how a caller is expected to react: argument
/// and configuration problems are user mistakes, format and I/O problems are
/// data problems, and incompatibility is a checkpoint/corpus mismatch.
#[derive(Debug, Error)]
pub enum AaiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error in {path}: {msg} (at byte offset {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("empty sequence: {0}")]
    EmptySequence(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("no matching records: {0}")]
    EmptyResult(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AaiError>;

impl AaiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AaiError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        AaiError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AaiError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (flags, config files, arguments).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            AaiError::InvalidArgument(_) | AaiError::Config(_) | AaiError::Incompatible(_)
        )
    }
}
