use rand::Rng;

use super::dense::DenseParams;
use super::gru::{gru_sequence, GruParams};
use super::{Mount, NetworkError};
use crate::autodiff::{Graph, NodeId, ParamId, ParamSet};

/// The critic: a GRU read one return at a time, then a linear head on
/// the final hidden state producing one unbounded score per sequence.
#[derive(Clone, Debug)]
pub struct CriticParams {
    pub horizon: usize,
    pub hidden_dim: usize,
    gru: GruParams,
    head: DenseParams,
}

impl CriticParams {
    pub fn register<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        horizon: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if horizon == 0 {
            return Err(NetworkError::Config(
                "critic horizon must be at least 1".into(),
            ));
        }
        let gru = GruParams::register(params, &format!("{prefix}.gru"), 1, hidden_dim, rng)?;
        let head = DenseParams::register(params, &format!("{prefix}.head"), hidden_dim, 1, rng)?;
        Ok(CriticParams {
            horizon,
            hidden_dim,
            gru,
            head,
        })
    }

    /// Every trainable id, for weight clipping after optimizer steps.
    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.gru.ids().to_vec();
        ids.extend(self.head.ids());
        ids
    }
}

/// Scores a batch of return sequences (`B×horizon`), yielding `B×1`.
pub fn critic_forward(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &CriticParams,
    sequence: NodeId,
) -> Result<NodeId, NetworkError> {
    let (_, cols) = graph.value(sequence).shape();
    if cols != params.horizon {
        return Err(NetworkError::Config(format!(
            "critic scores sequences of length {}, got {}",
            params.horizon, cols
        )));
    }
    let mut steps = Vec::with_capacity(params.horizon);
    for j in 0..params.horizon {
        steps.push(graph.slice_cols(sequence, j, j + 1)?);
    }
    let states = gru_sequence(graph, mount, &params.gru, &steps)?;
    params
        .head
        .apply(graph, mount, *states.last().expect("horizon ≥ 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_critic(seed: u64) -> (ParamSet, CriticParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let critic = CriticParams::register(&mut params, "critic", 3, 4, &mut rng).unwrap();
        (params, critic)
    }

    #[test]
    fn identical_sequences_get_identical_scores() {
        let (params, critic) = toy_critic(1);
        let seq = Tensor::from_vec(2, 3, vec![0.01, -0.02, 0.005, 0.01, -0.02, 0.005]).unwrap();
        let mut graph = Graph::new();
        let s = graph.constant(seq);
        let v = critic_forward(&mut graph, Mount::trainable(&params), &critic, s).unwrap();
        let out = graph.value(v);
        assert_eq!(out.shape(), (2, 1));
        assert_eq!(out.get(0, 0), out.get(1, 0));
    }

    #[test]
    fn zero_params_score_zero() {
        let (mut params, critic) = toy_critic(2);
        for id in critic.ids() {
            params.value_mut(id).fill(0.0);
        }
        let mut graph = Graph::new();
        let s = graph.constant(Tensor::from_vec(1, 3, vec![0.4, -0.9, 2.0]).unwrap());
        let v = critic_forward(&mut graph, Mount::trainable(&params), &critic, s).unwrap();
        assert_eq!(graph.value(v).get(0, 0), 0.0);
    }

    #[test]
    fn wrong_sequence_length_is_rejected() {
        let (params, critic) = toy_critic(3);
        let mut graph = Graph::new();
        let s = graph.constant(Tensor::zeros(1, 5));
        assert!(critic_forward(&mut graph, Mount::trainable(&params), &critic, s).is_err());
    }

    #[test]
    fn critic_params_pass_grad_check() {
        let (mut params, critic) = toy_critic(4);
        let seq = Tensor::from_vec(2, 3, vec![0.8, -1.2, 0.3, -0.4, 0.9, 1.5]).unwrap();
        let config = GradCheckConfig {
            step: 1e-4,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&mut params, &config, |set| {
            let mut graph = Graph::new();
            let s = graph.constant(seq.clone());
            let v = critic_forward(&mut graph, Mount::trainable(set), &critic, s)
                .map_err(NetworkError::into_autodiff)?;
            let loss = graph.sum_all(v);
            Ok((graph, loss))
        })
        .unwrap();
        assert_eq!(report.checked, params.total_values());
        assert!(
            report.max_rel_err < 1e-5,
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn input_gradients_pass_grad_check() {
        // The generator trains through the critic, so the gradient with
        // respect to the scored sequence itself must also be right.
        let (critic_set, critic) = toy_critic(5);
        let mut inputs = ParamSet::new();
        let seq = inputs
            .register(
                "sequence",
                Tensor::from_vec(2, 3, vec![0.8, -1.2, 0.3, -0.4, 0.9, 1.5]).unwrap(),
            )
            .unwrap();
        let config = GradCheckConfig {
            step: 1e-4,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&mut inputs, &config, |set| {
            let mut graph = Graph::new();
            let s = graph.param(set, seq);
            let v = critic_forward(&mut graph, Mount::frozen(&critic_set), &critic, s)
                .map_err(NetworkError::into_autodiff)?;
            let loss = graph.sum_all(v);
            Ok((graph, loss))
        })
        .unwrap();
        assert_eq!(report.checked, 6);
        assert!(
            report.max_rel_err < 1e-5,
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
