//! Detection network: nested residual U-blocks with language-conditioned
//! channel attention, plus the training machinery around it (autograd tape,
//! optimizers, checkpointing, finite-difference gradient checking).
//!
//! Everything numerical is generic over the scalar type: `f32` for
//! training throughput, `f64` for gradient verification against finite
//! differences.

pub mod checkpoint;
pub mod fusion;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod lgnet;
pub mod loss;
pub mod ops;
pub mod optim;
pub mod output_block;
pub mod rsu;
pub mod tensors;

pub use graph::{Gradients, Graph, Var};
pub use lgnet::{Lgnet, LgnetConfig, LgnetOutputs};
pub use tensors::{TensorId, TensorKind, Tensors};

/// Convenience aliases for the two supported precisions.
pub type Lgnet32 = Lgnet<f32>;
pub type Lgnet64 = Lgnet<f64>;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("{what}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("target descriptor length {got} does not match configured {expected}")]
    DescriptorLength { expected: usize, got: usize },
    #[error("input spatial side {side} too small: {stage} needs at least {needed}")]
    SpatialTooSmall {
        stage: String,
        side: usize,
        needed: usize,
    },
    #[error("non-finite values produced at {stage}")]
    NonFinite { stage: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
