use thiserror::Error;

use crate::numerics::TensorError;
use crate::pipeline::{CheckpointError, LatentsError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Latents(#[from] LatentsError),
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
