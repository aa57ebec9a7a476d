use rand::Rng;

use super::attention::{attention, AttentionParams};
use super::dense::DenseParams;
use super::gru::{gru_cell, gru_sequence, GruParams};
use super::news::{news_blocks, NewsBlockConfig, NewsBlockParams, NewsBlockState};
use super::{Mount, NetworkError};
use crate::autodiff::{Graph, NodeId, ParamSet, Phase};

/// Shape of the generator: window and horizon lengths, input widths, and
/// the two ablation switches (news context and attention).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    /// History steps `w` fed to the encoder.
    pub window: usize,
    /// Future steps `q` the decoder emits.
    pub horizon: usize,
    /// Market features per step (`p`).
    pub feature_dim: usize,
    /// Noise vector width (`d_z`).
    pub noise_dim: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    /// When false, the decoder consumes the last encoder state instead
    /// of the attention context; shapes are unchanged.
    pub use_attention: bool,
    /// News block stack; `None` removes the news columns from the
    /// encoder input entirely.
    pub news: Option<NewsBlockConfig>,
}

impl GeneratorConfig {
    /// Width of each encoder input step: noise + features + news context.
    pub fn encoder_input_dim(&self) -> usize {
        self.noise_dim
            + self.feature_dim
            + self.news.as_ref().map_or(0, NewsBlockConfig::context_dim)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        for (name, v) in [
            ("window", self.window),
            ("horizon", self.horizon),
            ("feature_dim", self.feature_dim),
            ("noise_dim", self.noise_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
        ] {
            if v == 0 {
                return Err(NetworkError::Config(format!(
                    "generator {name} must be at least 1"
                )));
            }
        }
        Ok(())
    }
}

/// All trainable generator parameters (Θ_g), registered as one group.
#[derive(Clone, Debug)]
pub struct GeneratorParams {
    config: GeneratorConfig,
    news: Option<NewsBlockParams>,
    encoder: GruParams,
    attention: Option<AttentionParams>,
    bridge: DenseParams,
    decoder: GruParams,
    head: DenseParams,
}

impl GeneratorParams {
    /// Registers every component under the `gen.*` prefix, in a fixed
    /// order: news blocks, encoder, attention, bridge, decoder, head.
    pub fn register<R: Rng>(
        params: &mut ParamSet,
        config: GeneratorConfig,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        config.validate()?;
        let news = config
            .news
            .clone()
            .map(|c| NewsBlockParams::register(params, "gen.news", c, rng))
            .transpose()?;
        let encoder = GruParams::register(
            params,
            "gen.encoder",
            config.encoder_input_dim(),
            config.encoder_hidden,
            rng,
        )?;
        let attention = config
            .use_attention
            .then(|| AttentionParams::register(params, "gen.attention", config.encoder_hidden, rng))
            .transpose()?;
        let bridge = DenseParams::register(
            params,
            "gen.bridge",
            config.encoder_hidden,
            config.decoder_hidden,
            rng,
        )?;
        let decoder = GruParams::register(
            params,
            "gen.decoder",
            config.encoder_hidden,
            config.decoder_hidden,
            rng,
        )?;
        let head = DenseParams::register(params, "gen.head", config.decoder_hidden, 1, rng)?;
        Ok(GeneratorParams {
            config,
            news,
            encoder,
            attention,
            bridge,
            decoder,
            head,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Fresh mutable forward-pass state (batchnorm running statistics).
    pub fn fresh_state(&self) -> GeneratorState {
        GeneratorState {
            news: self.news.as_ref().map(NewsBlockParams::fresh_state),
        }
    }
}

/// Mutable generator state carried between forward passes and stored in
/// checkpoints: the news blocks' batchnorm running statistics.
#[derive(Clone, Debug)]
pub struct GeneratorState {
    pub news: Option<NewsBlockState>,
}

/// Graph nodes for one batched forward pass of `B` windows.
#[derive(Clone, Debug)]
pub struct GeneratorInputs {
    /// Noise: one `B×d_z` node shared by every step, or `window` nodes
    /// for per-step draws.
    pub noise: Vec<NodeId>,
    /// Market features, `window` nodes of `B×p`.
    pub features: Vec<NodeId>,
    /// Pooled news embeddings for every window-day, `(B·window)×(k·m)`,
    /// step-major: rows `t·B .. (t+1)·B` belong to step `t`. `None` iff
    /// the generator was built without news.
    pub news: Option<NodeId>,
}

/// Runs the full generator on a batch: news context → per-step
/// concatenation `[z, s_t, h̃_t]` → GRU encoder → attention (or the last
/// encoder state) → bridged GRU decoder → `B×q` return sequences.
pub fn generator_forward(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &GeneratorParams,
    state: &mut GeneratorState,
    inputs: &GeneratorInputs,
    phase: Phase,
) -> Result<NodeId, NetworkError> {
    let cfg = &params.config;
    if inputs.features.len() != cfg.window {
        return Err(NetworkError::Config(format!(
            "generator expects {} feature steps, got {}",
            cfg.window,
            inputs.features.len()
        )));
    }
    let batch = graph.value(inputs.features[0]).rows();
    for &f in &inputs.features {
        if graph.value(f).shape() != (batch, cfg.feature_dim) {
            return Err(NetworkError::Config(format!(
                "feature steps must all be {batch}x{}, got {:?}",
                cfg.feature_dim,
                graph.value(f).shape()
            )));
        }
    }
    if inputs.noise.len() != 1 && inputs.noise.len() != cfg.window {
        return Err(NetworkError::Config(format!(
            "noise must be one shared draw or one per step ({}), got {}",
            cfg.window,
            inputs.noise.len()
        )));
    }
    for &z in &inputs.noise {
        if graph.value(z).shape() != (batch, cfg.noise_dim) {
            return Err(NetworkError::Config(format!(
                "noise draws must be {batch}x{}, got {:?}",
                cfg.noise_dim,
                graph.value(z).shape()
            )));
        }
    }

    // News context for all window-days at once, then sliced per step.
    let context_steps: Option<Vec<NodeId>> = match (&params.news, inputs.news) {
        (Some(news_params), Some(pooled)) => {
            let rows = graph.value(pooled).rows();
            if rows != batch * cfg.window {
                return Err(NetworkError::Config(format!(
                    "pooled news must have batch·window = {} rows, got {rows}",
                    batch * cfg.window
                )));
            }
            let news_state = state.news.as_mut().ok_or_else(|| {
                NetworkError::Config("generator state is missing news statistics".into())
            })?;
            let ctx = news_blocks(graph, mount, news_params, news_state, pooled, phase)?;
            let mut steps = Vec::with_capacity(cfg.window);
            for t in 0..cfg.window {
                steps.push(graph.slice_rows(ctx, t * batch, (t + 1) * batch)?);
            }
            Some(steps)
        }
        (None, None) => None,
        (Some(_), None) => {
            return Err(NetworkError::Config(
                "generator was built with news blocks but no news input was given".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(NetworkError::Config(
                "generator was built without news blocks but news input was given".into(),
            ))
        }
    };

    let mut xs = Vec::with_capacity(cfg.window);
    for t in 0..cfg.window {
        let z = inputs.noise[if inputs.noise.len() == 1 { 0 } else { t }];
        let mut parts = vec![z, inputs.features[t]];
        if let Some(ctx) = &context_steps {
            parts.push(ctx[t]);
        }
        xs.push(graph.concat_cols(&parts)?);
    }

    let states = gru_sequence(graph, mount, &params.encoder, &xs)?;
    let last = *states.last().expect("window ≥ 1");
    let context = match &params.attention {
        Some(attn) => attention(graph, mount, attn, &states)?.0,
        None => last,
    };
    decoder_forward(graph, mount, params, context, last)
}

/// The decoding half on its own: bridges the last encoder state into the
/// decoder's initial hidden state (`tanh(h·W_d + b_d)`), unrolls the
/// decoder GRU `q` steps with `context` as the input every step, and
/// applies the shared linear head to each state, yielding `B×q`.
pub fn decoder_forward(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &GeneratorParams,
    context: NodeId,
    last_encoder_state: NodeId,
) -> Result<NodeId, NetworkError> {
    let bridged = params.bridge.apply(graph, mount, last_encoder_state)?;
    let mut h = graph.tanh(bridged);
    let mut outputs = Vec::with_capacity(params.config.horizon);
    for _ in 0..params.config.horizon {
        h = gru_cell(graph, mount, &params.decoder, context, h)?;
        outputs.push(params.head.apply(graph, mount, h)?);
    }
    Ok(graph.concat_cols(&outputs)?)
}
