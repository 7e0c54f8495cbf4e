//! Dense `f64` tensors with a define-by-run tape for reverse-mode gradients.

mod alloc;
mod checkpoint;
mod gradcheck;
mod optim;
mod param;
mod tape;
mod tensor;

use thiserror::Error;

pub use alloc::tune_allocator;
pub use checkpoint::{Checkpoint, CheckpointRecord, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_sampled, GradCheckReport};
pub use optim::{clip_grad_norm, Adam, Sgd};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Tape, Var, BCE_CLAMP};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("invalid tensor shape {shape:?}")]
    InvalidShape { shape: Vec<usize> },
    #[error("backward needs a scalar output, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("gradient check: non-finite objective while perturbing {0}")]
    GradCheckNonFinite(String),
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
