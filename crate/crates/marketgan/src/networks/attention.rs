use rand::Rng;

use super::init::xavier_uniform;
use super::{Mount, NetworkError};
use crate::autodiff::{Graph, NodeId, ParamId, ParamSet, Tensor};

/// Additive attention over encoder states: a square map `W_a`, bias
/// `b_a`, and scoring vector `v`, all sized to the encoder hidden width.
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub hidden_dim: usize,
    w_a: ParamId,
    b_a: ParamId,
    v: ParamId,
}

impl AttentionParams {
    pub fn register<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if hidden_dim == 0 {
            return Err(NetworkError::Config(format!(
                "attention `{prefix}` needs a positive hidden width"
            )));
        }
        let w_a = params.register(
            &format!("{prefix}.w_a"),
            xavier_uniform(hidden_dim, hidden_dim, rng),
        )?;
        let b_a = params.register(&format!("{prefix}.b_a"), Tensor::zeros(1, hidden_dim))?;
        let v = params.register(&format!("{prefix}.v"), xavier_uniform(hidden_dim, 1, rng))?;
        Ok(AttentionParams {
            hidden_dim,
            w_a,
            b_a,
            v,
        })
    }

    pub fn ids(&self) -> [ParamId; 3] {
        [self.w_a, self.b_a, self.v]
    }
}

/// Soft attention over a sequence of `B×H` hidden states.
///
/// Each state is scored by `vᵀ tanh(h·W_a + b_a)`, the scores are
/// softmax-normalized over the time axis, and the context is the
/// weighted sum of the states. Returns `(context: B×H, weights: B×w)`;
/// each weight row sums to 1.
pub fn attention(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &AttentionParams,
    states: &[NodeId],
) -> Result<(NodeId, NodeId), NetworkError> {
    if states.is_empty() {
        return Err(NetworkError::Config(
            "attention needs at least one hidden state".into(),
        ));
    }
    for &h in states {
        let (_, cols) = graph.value(h).shape();
        if cols != params.hidden_dim {
            return Err(NetworkError::Config(format!(
                "attention sized for width {}, got a state of width {}",
                params.hidden_dim, cols
            )));
        }
    }
    let w_a = mount.node(graph, params.w_a);
    let b_a = mount.node(graph, params.b_a);
    let v = mount.node(graph, params.v);

    let mut scores = Vec::with_capacity(states.len());
    for &h in states {
        let hw = graph.matmul(h, w_a)?;
        let pre = graph.add_row(hw, b_a)?;
        let act = graph.tanh(pre);
        scores.push(graph.matmul(act, v)?); // B×1
    }
    let stacked = graph.concat_cols(&scores)?; // B×w
    let weights = graph.softmax_rows(stacked);

    let mut context = None;
    for (t, &h) in states.iter().enumerate() {
        let w_t = graph.slice_cols(weights, t, t + 1)?; // B×1
        let term = graph.mul_col(h, w_t)?;
        context = Some(match context {
            None => term,
            Some(acc) => graph.add(acc, term)?,
        });
    }
    Ok((context.expect("states nonempty"), weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(hidden: usize, seed: u64) -> (ParamSet, AttentionParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let attn = AttentionParams::register(&mut params, "a", hidden, &mut rng).unwrap();
        (params, attn)
    }

    #[test]
    fn single_state_passes_through_unchanged() {
        let (params, attn) = random_params(3, 1);
        let mut graph = Graph::new();
        let h = graph.constant(Tensor::from_vec(2, 3, vec![1.0, -2.0, 0.5, 4.0, 0.0, -1.0]).unwrap());
        let (context, weights) =
            attention(&mut graph, Mount::trainable(&params), &attn, &[h]).unwrap();
        assert_eq!(graph.value(weights).data(), &[1.0, 1.0]);
        assert_eq!(graph.value(context).data(), graph.value(h).data());
    }

    #[test]
    fn identical_states_get_uniform_weights_and_their_common_value() {
        let (params, attn) = random_params(3, 2);
        let mut graph = Graph::new();
        let state = Tensor::from_vec(1, 3, vec![0.3, -0.7, 1.1]).unwrap();
        let hs: Vec<NodeId> = (0..4).map(|_| graph.constant(state.clone())).collect();
        let (context, weights) =
            attention(&mut graph, Mount::trainable(&params), &attn, &hs).unwrap();
        for &w in graph.value(weights).data() {
            assert!((w - 0.25).abs() < 1e-12, "weights {:?}", graph.value(weights).data());
        }
        for (c, s) in graph.value(context).data().iter().zip(state.data()) {
            assert!((c - s).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one_per_row() {
        let (params, attn) = random_params(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut graph = Graph::new();
        let hs: Vec<NodeId> = (0..6)
            .map(|_| {
                let data = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
                graph.constant(Tensor::from_vec(3, 4, data).unwrap())
            })
            .collect();
        let (_, weights) = attention(&mut graph, Mount::trainable(&params), &attn, &hs).unwrap();
        let w = graph.value(weights);
        for r in 0..w.rows() {
            let sum: f64 = (0..w.cols()).map(|c| w.get(r, c)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {r} sums to {sum}");
        }
    }

    #[test]
    fn mismatched_state_width_is_rejected() {
        let (params, attn) = random_params(3, 4);
        let mut graph = Graph::new();
        let h = graph.constant(Tensor::zeros(1, 5));
        assert!(attention(&mut graph, Mount::trainable(&params), &attn, &[h]).is_err());
    }

    #[test]
    fn attention_params_pass_grad_check() {
        let (mut params, attn) = random_params(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let states: Vec<Tensor> = (0..3)
            .map(|_| {
                let data = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
                Tensor::from_vec(2, 3, data).unwrap()
            })
            .collect();

        let config = GradCheckConfig {
            step: 1e-4,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&mut params, &config, |set| {
            let mut graph = Graph::new();
            let hs: Vec<NodeId> = states.iter().map(|s| graph.constant(s.clone())).collect();
            let (context, _) = attention(&mut graph, Mount::trainable(set), &attn, &hs)
                .map_err(NetworkError::into_autodiff)?;
            let loss = graph.sum_all(context);
            Ok((graph, loss))
        })
        .unwrap();
        assert!(
            report.max_rel_err < 1e-5,
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
