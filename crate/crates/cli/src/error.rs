use std::path::PathBuf;

use jaitts_core::pipeline::{CheckpointError, LatentsError};
use jaitts_eval::EvalError;
use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    /// Model, training (non-finite loss), configuration value or checkpoint error.
    pub const MODEL: i32 = 1;
    pub const IO: i32 = 2;
    pub const EMPTY_TOKENS: i32 = 3;
    /// A malformed line or row in an input file or argument list.
    pub const MALFORMED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] jaitts_core::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("latents: {0}")]
    Latents(#[from] LatentsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("token list is empty")]
    EmptyTokens,
    #[error("{source_name} line {line}: {reason}")]
    Malformed {
        source_name: String,
        line: usize,
        reason: String,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(source_name: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Self::Malformed {
            source_name: source_name.into(),
            line,
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use jaitts_core::Error as E;
        match self {
            Self::Model(E::Io(_)) => exit::IO,
            Self::Model(E::Checkpoint(CheckpointError::Io(_))) | Self::Checkpoint(CheckpointError::Io(_)) => exit::IO,
            Self::Model(E::Latents(LatentsError::Io(_))) | Self::Latents(LatentsError::Io(_)) => exit::IO,
            Self::Model(_) | Self::Checkpoint(_) | Self::Latents(_) => exit::MODEL,
            Self::Eval(e) if e.is_io() => exit::IO,
            Self::Eval(_) | Self::Malformed { .. } => exit::MALFORMED,
            Self::Io { .. } => exit::IO,
            Self::EmptyTokens => exit::EMPTY_TOKENS,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
