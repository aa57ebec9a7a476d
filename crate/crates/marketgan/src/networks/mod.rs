//! Generator and critic networks as pure graph-building functions.
//!
//! Every forward pass assembles nodes on an [`autodiff::Graph`](crate::autodiff::Graph)
//! and works on whole batches: a batch of `B` windows flows through as
//! `B`-row tensors. The generator is a news-context block stack feeding a
//! GRU encoder, soft attention over the encoder states, a bridged GRU
//! decoder, and a shared linear head emitting one return per future step.
//! The critic is a GRU over a return sequence with a scalar linear head.
//!
//! Parameters live in a [`ParamSet`] and are referred to by id; a
//! [`Mount`] decides whether a pass mounts them trainably (gradients
//! accumulate) or frozen (values copied as constants). Freezing is how
//! the generator trains through the critic without touching it, and vice
//! versa.

mod attention;
mod critic;
mod dense;
mod generator;
mod gru;
mod init;
mod news;
mod noise;

pub use attention::{attention, AttentionParams};
pub use critic::{critic_forward, CriticParams};
pub use dense::DenseParams;
pub use generator::{
    decoder_forward, generator_forward, GeneratorConfig, GeneratorInputs, GeneratorParams,
    GeneratorState,
};
pub use gru::{gru_cell, gru_sequence, GruParams};
pub use news::{news_blocks, NewsBlockConfig, NewsBlockParams, NewsBlockState};
pub use noise::NoiseSpec;

use crate::autodiff::{AutodiffError, Graph, NodeId, ParamId, ParamSet};

/// Negative-side slope of every leaky ReLU in the news blocks.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Errors from network construction and forward passes.
#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{0}")]
    Config(String),
}

impl NetworkError {
    /// Collapses into the autodiff error type, for grad-check closures
    /// that must return [`AutodiffError`].
    pub fn into_autodiff(self) -> AutodiffError {
        match self {
            NetworkError::Autodiff(e) => e,
            NetworkError::Config(detail) => AutodiffError::BadShape {
                op: "network config",
                detail,
            },
        }
    }
}

/// How a forward pass materializes parameters on the graph.
///
/// `trainable` mounts record parameter ids so [`Graph::backward`]
/// accumulates their gradients; `frozen` mounts copy the current values
/// in as constants — gradients still flow *through* them to upstream
/// nodes, but nothing accumulates for the frozen side. Adversarial
/// updates alternate which side is frozen.
#[derive(Clone, Copy)]
pub struct Mount<'a> {
    set: &'a ParamSet,
    trainable: bool,
}

impl<'a> Mount<'a> {
    pub fn trainable(set: &'a ParamSet) -> Self {
        Mount {
            set,
            trainable: true,
        }
    }

    pub fn frozen(set: &'a ParamSet) -> Self {
        Mount {
            set,
            trainable: false,
        }
    }

    /// The backing parameter set.
    pub fn params(&self) -> &'a ParamSet {
        self.set
    }

    /// Puts one parameter on the graph under this mount's policy.
    pub fn node(&self, graph: &mut Graph, id: ParamId) -> NodeId {
        if self.trainable {
            graph.param(self.set, id)
        } else {
            graph.constant(self.set.value(id).clone())
        }
    }
}
