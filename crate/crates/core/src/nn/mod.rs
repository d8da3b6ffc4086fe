//! Dense-tensor neural network engine: layers, loss, Nadam, training with
//! early stopping, finite-difference gradient checks and checkpoints.

mod checkpoint;
mod gradcheck;
pub mod layers;
mod nadam;
mod network;
mod par;
mod real;
mod tensor;
mod train;

use alloc::string::String;

pub use checkpoint::{
    checkpoint_tensors, decode_checkpoint, encode_checkpoint, restore_checkpoint, CheckpointError,
    NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use layers::mse_loss;
pub use nadam::{Nadam, NadamConfig};
pub use network::{LayerKind, Network, NodeId, Tape};
pub use real::Real;
pub use tensor::Tensor;
pub use train::{
    evaluate_mse, train, EarlyStopping, EpochRecord, History, StopReason, TrainConfig, TrainSet,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite {what}")]
    NonFinite { what: String },
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
