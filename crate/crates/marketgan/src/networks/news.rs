use rand::Rng;

use super::dense::DenseParams;
use super::{Mount, NetworkError, LEAKY_SLOPE};
use crate::autodiff::{
    batchnorm, BatchNormState, Graph, NodeId, ParamId, ParamSet, Phase, Tensor,
};

/// Widths of the dense block stack that compresses pooled news
/// embeddings into a `g`-dimensional context vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewsBlockConfig {
    /// Width of the pooled input (`k·m`: headline slots × embedding dim).
    pub input_dim: usize,
    /// Output width of each successive block; the last entry is `g`.
    pub widths: Vec<usize>,
}

impl NewsBlockConfig {
    /// The conventional stack: `input → 256 → 64 → g`.
    pub fn standard(input_dim: usize, context_dim: usize) -> Self {
        NewsBlockConfig {
            input_dim,
            widths: vec![256, 64, context_dim],
        }
    }

    /// The context width `g` the final block produces.
    pub fn context_dim(&self) -> usize {
        *self.widths.last().expect("validated nonempty")
    }

    fn validate(&self) -> Result<(), NetworkError> {
        if self.input_dim == 0 || self.widths.is_empty() || self.widths.contains(&0) {
            return Err(NetworkError::Config(format!(
                "news blocks need a positive input width and nonempty positive widths, got {} and {:?}",
                self.input_dim, self.widths
            )));
        }
        Ok(())
    }
}

/// Trainable parameters of the news block stack: one affine layer per
/// block, plus batchnorm scale/shift for every block except the last.
#[derive(Clone, Debug)]
pub struct NewsBlockParams {
    config: NewsBlockConfig,
    layers: Vec<DenseParams>,
    norm_scales: Vec<ParamId>,
    norm_shifts: Vec<ParamId>,
}

impl NewsBlockParams {
    pub fn register<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        config: NewsBlockConfig,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.widths.len());
        let mut norm_scales = Vec::new();
        let mut norm_shifts = Vec::new();
        let mut in_dim = config.input_dim;
        for (i, &out_dim) in config.widths.iter().enumerate() {
            layers.push(DenseParams::register(
                params,
                &format!("{prefix}.{i}"),
                in_dim,
                out_dim,
                rng,
            )?);
            if i + 1 != config.widths.len() {
                norm_scales.push(params.register(
                    &format!("{prefix}.{i}.norm_scale"),
                    Tensor::filled(1, out_dim, 1.0),
                )?);
                norm_shifts.push(
                    params.register(&format!("{prefix}.{i}.norm_shift"), Tensor::zeros(1, out_dim))?,
                );
            }
            in_dim = out_dim;
        }
        Ok(NewsBlockParams {
            config,
            layers,
            norm_scales,
            norm_shifts,
        })
    }

    pub fn config(&self) -> &NewsBlockConfig {
        &self.config
    }

    pub fn context_dim(&self) -> usize {
        self.config.context_dim()
    }

    /// Fresh running statistics (mean 0, variance 1) for every
    /// batch-normalized block.
    pub fn fresh_state(&self) -> NewsBlockState {
        NewsBlockState {
            norms: self
                .norm_scales
                .iter()
                .enumerate()
                .map(|(i, _)| BatchNormState::new(self.config.widths[i]))
                .collect(),
        }
    }
}

/// Running batchnorm statistics for the news blocks — mutable training
/// state, updated by every [`Phase::Train`] forward pass and carried in
/// checkpoints.
#[derive(Clone, Debug)]
pub struct NewsBlockState {
    norms: Vec<BatchNormState>,
}

impl NewsBlockState {
    pub fn norms(&self) -> &[BatchNormState] {
        &self.norms
    }

    pub fn from_norms(norms: Vec<BatchNormState>) -> Self {
        NewsBlockState { norms }
    }
}

/// Runs the block stack on pooled news vectors (`R×input_dim`, one row
/// per window-day): each block is affine → batchnorm → leaky ReLU,
/// except the last, which is affine → tanh, so the output (`R×g`) is
/// componentwise inside (−1, 1).
pub fn news_blocks(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &NewsBlockParams,
    state: &mut NewsBlockState,
    x: NodeId,
    phase: Phase,
) -> Result<NodeId, NetworkError> {
    let (_, cols) = graph.value(x).shape();
    if cols != params.config.input_dim {
        return Err(NetworkError::Config(format!(
            "news blocks expect {} input columns, got {}",
            params.config.input_dim, cols
        )));
    }
    if state.norms.len() != params.norm_scales.len() {
        return Err(NetworkError::Config(format!(
            "news block state tracks {} normalized blocks, params have {}",
            state.norms.len(),
            params.norm_scales.len()
        )));
    }
    let mut h = x;
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        h = layer.apply(graph, mount, h)?;
        if i == last {
            h = graph.tanh(h);
        } else {
            let scale = mount.node(graph, params.norm_scales[i]);
            let shift = mount.node(graph, params.norm_shifts[i]);
            h = batchnorm(graph, h, scale, shift, &mut state.norms[i], phase)?;
            h = graph.leaky_relu(h, LEAKY_SLOPE);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_setup(seed: u64) -> (ParamSet, NewsBlockParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let config = NewsBlockConfig {
            input_dim: 6,
            widths: vec![5, 4, 3],
        };
        let blocks = NewsBlockParams::register(&mut params, "news", config, &mut rng).unwrap();
        (params, blocks)
    }

    #[test]
    fn standard_config_shrinks_to_the_context_width() {
        let c = NewsBlockConfig::standard(25 * 50, 10);
        assert_eq!(c.widths, vec![256, 64, 10]);
        assert_eq!(c.context_dim(), 10);
    }

    #[test]
    fn zero_input_with_zero_biases_gives_zero_output() {
        let (mut params, blocks) = toy_setup(1);
        // Zero the affine weights too so every pre-activation is exactly 0.
        for layer in &blocks.layers {
            for id in layer.ids() {
                params.value_mut(id).fill(0.0);
            }
        }
        for phase in [Phase::Train, Phase::Eval] {
            let mut graph = Graph::new();
            let mut state = blocks.fresh_state();
            let x = graph.constant(Tensor::zeros(4, 6));
            let out = news_blocks(
                &mut graph,
                Mount::trainable(&params),
                &blocks,
                &mut state,
                x,
                phase,
            )
            .unwrap();
            assert!(
                graph.value(out).data().iter().all(|&v| v == 0.0),
                "nonzero output in {phase:?}"
            );
        }
    }

    #[test]
    fn output_width_is_g_and_components_stay_inside_unit_interval() {
        let (params, blocks) = toy_setup(2);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut graph = Graph::new();
        let mut state = blocks.fresh_state();
        let data = (0..5 * 6).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x = graph.constant(Tensor::from_vec(5, 6, data).unwrap());
        let out = news_blocks(
            &mut graph,
            Mount::trainable(&params),
            &blocks,
            &mut state,
            x,
            Phase::Train,
        )
        .unwrap();
        assert_eq!(graph.value(out).shape(), (5, 3));
        assert!(graph.value(out).data().iter().all(|&v| v.abs() < 1.0));
    }

    #[test]
    fn train_phase_updates_running_stats_and_eval_phase_does_not() {
        let (params, blocks) = toy_setup(3);
        let mut state = blocks.fresh_state();
        let before: Vec<f64> = state.norms()[0].running_mean().data().to_vec();

        let mut graph = Graph::new();
        let x = graph.constant(Tensor::filled(3, 6, 2.0));
        news_blocks(
            &mut graph,
            Mount::trainable(&params),
            &blocks,
            &mut state,
            x,
            Phase::Train,
        )
        .unwrap();
        let after_train: Vec<f64> = state.norms()[0].running_mean().data().to_vec();
        assert_ne!(before, after_train);

        let mut graph = Graph::new();
        let x = graph.constant(Tensor::filled(3, 6, -5.0));
        news_blocks(
            &mut graph,
            Mount::trainable(&params),
            &blocks,
            &mut state,
            x,
            Phase::Eval,
        )
        .unwrap();
        let after_eval: Vec<f64> = state.norms()[0].running_mean().data().to_vec();
        assert_eq!(after_train, after_eval);
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let (params, blocks) = toy_setup(4);
        let mut graph = Graph::new();
        let mut state = blocks.fresh_state();
        let x = graph.constant(Tensor::zeros(2, 9));
        assert!(news_blocks(
            &mut graph,
            Mount::trainable(&params),
            &blocks,
            &mut state,
            x,
            Phase::Train
        )
        .is_err());
    }

    #[test]
    fn block_params_pass_grad_check() {
        let (mut params, blocks) = toy_setup(5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let data: Vec<f64> = (0..4 * 6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x_data = Tensor::from_vec(4, 6, data).unwrap();

        let config = GradCheckConfig {
            step: 1e-4,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&mut params, &config, |set| {
            let mut graph = Graph::new();
            let mut state = blocks.fresh_state();
            let x = graph.constant(x_data.clone());
            let out = news_blocks(
                &mut graph,
                Mount::trainable(set),
                &blocks,
                &mut state,
                x,
                Phase::Train,
            )
            .map_err(NetworkError::into_autodiff)?;
            let loss = graph.sum_all(out);
            Ok((graph, loss))
        })
        .unwrap();
        assert!(report.checked > 0);
        assert!(
            report.max_rel_err < 1e-5,
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
