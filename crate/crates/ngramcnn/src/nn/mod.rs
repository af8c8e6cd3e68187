//! A small reverse-mode differentiable engine.
//!
//! The engine supplies exactly the layer set the network variants need:
//! valid (no-padding) 1-D convolution, regional max-pooling, dense layers,
//! inverted dropout, flatten/concatenate plumbing and a single-unit
//! probability output. Gradients are produced by recording a forward pass
//! over a [`Graph`] and walking it backwards; [`gradcheck`] verifies every
//! analytic gradient against central finite differences.
//!
//! Everything is generic over [`Scalar`]: training normally runs at `f32`
//! (which is also the checkpoint storage width), while gradient checking
//! instantiates the same code at `f64`, where finite differences are
//! trustworthy.

mod activation;
mod adam;
mod gradcheck;
mod graph;
mod layer;
mod loss;
mod tensor;

pub use activation::Activation;
pub use adam::{adam_step, AdamParams};
pub use gradcheck::gradcheck;
pub use graph::{Graph, LayerSummary, Node, NodeInput, RunRecord};
pub use layer::{
    Cache, ConcatKind, Conv1d, Dense, Dropout, Layer, MaxPool, Mode, Output, OutputKind,
};
pub use loss::{bce_grad, bce_loss, PROB_CLAMP};
pub use tensor::{Parameter, Scalar, Tensor};

use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("input length {input} is shorter than kernel length {kernel}")]
    InputShorterThanKernel { input: usize, kernel: usize },
    #[error("layer `{layer}` produced an empty output (length underflow)")]
    LengthUnderflow { layer: String },
    #[error("expected input shape {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("dropout in train mode needs an RNG")]
    MissingRng,
    #[error("graph contains dropout in train mode; gradient check requires a deterministic graph")]
    NonDeterministicGraph,
    #[error("run record does not belong to this graph")]
    ForeignRecord,
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
}
