use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The configuration cannot be executed (budget too small, bad knob values).
    #[error("configuration error: {0}")]
    Config(String),

    /// The memory budget does not leave room for every buffer.
    #[error(
        "memory capacity {capacity} bytes is infeasible: at least {minimum} bytes are required ({detail})"
    )]
    InfeasibleBudget {
        capacity: u64,
        minimum: u64,
        detail: String,
    },

    /// Malformed input data: text formats report the offending line.
    #[error("format error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format {
        line: Option<usize>,
        message: String,
    },

    #[error("dimension mismatch: left operand has {left_cols} columns, right operand has {right_rows} rows")]
    DimensionMismatch { left_cols: usize, right_rows: usize },

    #[error("row {row} is not covered by any block")]
    RowNotFound { row: usize },

    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// The storage device ran out of space.
    #[error("out of storage while writing {path:?} ({bytes_attempted} bytes attempted)")]
    OutOfStorage { path: PathBuf, bytes_attempted: u64 },

    #[error("storage error on {path:?}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn format_at(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line: Some(line),
            message: message.into(),
        }
    }

    /// Wraps an I/O failure on `path`, turning a full device into [`Error::OutOfStorage`].
    pub(crate) fn storage(
        path: impl Into<PathBuf>,
        source: io::Error,
        bytes_attempted: u64,
    ) -> Self {
        let path = path.into();
        if is_storage_full(&source) {
            Error::OutOfStorage {
                path,
                bytes_attempted,
            }
        } else {
            Error::Storage { path, source }
        }
    }
}

fn is_storage_full(err: &io::Error) -> bool {
    const ENOSPC: i32 = 28;
    err.kind() == io::ErrorKind::StorageFull || err.raw_os_error() == Some(ENOSPC)
}
