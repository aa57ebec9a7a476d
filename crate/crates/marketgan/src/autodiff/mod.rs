//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! The engine is a flat expression tape ([`Graph`]): building an op
//! evaluates it immediately and records its inputs, so node ids are
//! already in topological order and the backward sweep is a single
//! reverse pass. Trainable tensors live in a [`ParamSet`] and are mounted
//! onto a tape by copy, which keeps graphs short-lived and borrow-free;
//! gradients accumulate additively into the set until zeroed.
//!
//! Everything is two-dimensional: scalars are `1x1`, vectors are `1xn` or
//! `nx1`. All kernels run in a fixed iteration order, so forward values,
//! gradients, and optimizer updates are bit-identical across runs given
//! identical inputs.

mod batchnorm;
mod gradcheck;
mod graph;
mod params;
mod rmsprop;
mod tensor;

pub use batchnorm::{batchnorm, BatchNormState, Phase};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, WorstEntry};
pub use graph::{Graph, NodeId};
pub use params::{ParamId, ParamSet};
pub use rmsprop::{rmsprop_step, OptimizerState, RmspropConfig};
pub use tensor::Tensor;

/// Errors from tape construction, backward passes, and optimizer updates.
#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes ({detail})")]
    BadShape { op: &'static str, detail: String },
    #[error("parameter `{0}` is already registered")]
    DuplicateParam(String),
    #[error("no parameter named `{0}`")]
    UnknownParam(String),
    #[error("loss must be a 1x1 tensor, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("batch normalization in training mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
}
