use std::path::PathBuf;

use crate::alignment::Granularity;

/// Errors produced by the toolkit.
///
/// `Validation` and `Parse` are caller mistakes (bad input data or bad settings);
/// `Io` is an environment failure. The CLI maps these onto distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("{0}")]
    Validation(String),

    #[error("{context}: line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("granularity mismatch: expected {expected}, found {found}")]
    Granularity {
        expected: Granularity,
        found: Granularity,
    },

    #[error("pair ({i}, {j}) out of bounds for a {rows}x{cols} sentence pair")]
    OutOfBounds {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: record {record}: {message}")]
    Format {
        path: PathBuf,
        record: usize,
        message: String,
    },
}

impl AlignError {
    pub fn validation(msg: impl Into<String>) -> Self {
        AlignError::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AlignError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the environment rather than by the inputs.
    pub fn is_runtime(&self) -> bool {
        matches!(self, AlignError::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, AlignError>;
