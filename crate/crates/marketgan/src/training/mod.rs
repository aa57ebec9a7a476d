//! Adversarial training: configuration, losses, the training loop, and
//! checkpointing.
//!
//! The pieces fit together as
//!
//! ```text
//! TrainConfig + TrainingSet --> train() --> TrainRun
//!                                            |-- Checkpoint  (save/load)
//!                                            `-- Vec<LossRecord>  (CSV log)
//! ```
//!
//! [`TrainingSet`] holds per-day feature rows plus the sliding windows
//! over them; [`train`] runs the clipped-critic adversarial loop and
//! returns a [`Checkpoint`] that freezes the model, optimizers, norm
//! statistics, and RNG state for bit-exact reuse.

mod checkpoint;
mod config;
mod data;
mod gradsuite;
mod losses;
mod trainer;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, save_checkpoint, Checkpoint, RngSnapshot,
    CHECKPOINT_VERSION,
};
pub use config::TrainConfig;
pub use data::{feature_tensor, TrainingSet};
pub use gradsuite::{gradient_suite, toy_suite_config, GradSuiteReport};
pub use losses::{
    clip_weights, critic_loss, generator_loss, supervised_loss, weighted_loss_eval,
    weighted_loss_smooth, CriticLoss, GeneratorLoss, LossWeights,
};
pub use trainer::{train, write_loss_log, LossRecord, TrainRun};

use crate::autodiff::AutodiffError;
use crate::networks::NetworkError;

/// Errors from training, loss evaluation, and checkpoint I/O.
#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    /// A configuration value or combination is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The training data is malformed or inconsistent.
    #[error("invalid training data: {0}")]
    Data(String),

    /// A logged loss left the finite range; the run aborts rather than
    /// write garbage rows.
    #[error("{column} became non-finite at iteration {iteration} (epoch {epoch})")]
    NonFinite {
        column: &'static str,
        iteration: u64,
        epoch: usize,
    },

    /// The checkpoint was written by an incompatible format version.
    #[error("checkpoint format version {found} is not supported (this build reads {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    /// The file ended mid-section.
    #[error("checkpoint is truncated: ran out of bytes reading {what}")]
    CheckpointTruncated { what: String },

    /// A stored tensor does not fit the architecture its own config
    /// describes.
    #[error("checkpoint tensor `{tensor}` has shape {found:?} but the model expects {expected:?}")]
    CheckpointShape {
        tensor: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    /// Structural damage that is not a simple truncation: bad magic,
    /// implausible sizes, unknown tensors, trailing bytes.
    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Network(#[from] NetworkError),

    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    /// CSV encoding failed while writing the loss log.
    #[error("loss log: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
