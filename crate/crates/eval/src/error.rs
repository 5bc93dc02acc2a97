use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("numeral {digits:?}: {reason}")]
    Numeral { digits: String, reason: &'static str },
    #[error("input is not valid UTF-8: {0}")]
    Utf8(#[from] std::str::Utf8Error),
    #[error("reference is empty after normalization")]
    EmptyReference,
    #[error("vectors have lengths {a} and {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("vector is empty")]
    EmptyVector,
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("{path}: not an embedding file (magic {found:?})")]
    EmbeddingMagic { path: PathBuf, found: Vec<u8> },
    #[error("{path}: embedding of dimension {dim} needs {expected} bytes, file has {found}")]
    EmbeddingLength {
        path: PathBuf,
        dim: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl EvalError {
    pub(crate) fn row(row: usize, reason: impl Into<String>) -> Self {
        Self::MalformedRow {
            row,
            reason: reason.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::File {
            path: path.into(),
            source,
        }
    }

    /// Row number for errors tied to one line of an input table.
    pub fn row_number(&self) -> Option<usize> {
        match self {
            Self::MalformedRow { row, .. } => Some(*row),
            _ => None,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io(_) | Self::File { .. })
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;
