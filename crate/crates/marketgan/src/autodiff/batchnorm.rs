use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use super::AutodiffError;

/// Whether a forward pass uses batch statistics (and updates the running
/// ones) or freezes everything to the stored running statistics.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Phase {
    Train,
    Eval,
}

/// Non-trainable batch-normalization state: running mean and variance per
/// feature column.
///
/// The running variance tracks the *population* (biased) batch variance —
/// the same quantity used to normalize in training mode — so that after
/// enough passes over identical batches, eval-mode output converges to the
/// train-mode output instead of stalling a Bessel factor away from it.
#[derive(Clone, Debug)]
pub struct BatchNormState {
    running_mean: Tensor,
    running_var: Tensor,
    momentum: f64,
    epsilon: f64,
}

impl BatchNormState {
    /// Fresh state for `features` columns: mean 0, variance 1,
    /// momentum 0.1, epsilon 1e-5.
    pub fn new(features: usize) -> Self {
        BatchNormState {
            running_mean: Tensor::zeros(1, features),
            running_var: Tensor::filled(1, features, 1.0),
            momentum: 0.1,
            epsilon: 1e-5,
        }
    }

    pub fn features(&self) -> usize {
        self.running_mean.cols()
    }

    pub fn running_mean(&self) -> &Tensor {
        &self.running_mean
    }

    pub fn running_var(&self) -> &Tensor {
        &self.running_var
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// Rebuilds state from serialized statistics.
    pub fn from_stats(running_mean: Tensor, running_var: Tensor) -> Result<Self, AutodiffError> {
        if running_mean.rows() != 1
            || running_var.rows() != 1
            || running_mean.cols() != running_var.cols()
        {
            return Err(AutodiffError::BadShape {
                op: "batchnorm_from_stats",
                detail: format!(
                    "mean {:?} and variance {:?} must both be 1xC",
                    running_mean.shape(),
                    running_var.shape()
                ),
            });
        }
        Ok(BatchNormState {
            running_mean,
            running_var,
            momentum: 0.1,
            epsilon: 1e-5,
        })
    }
}

/// Batch normalization over feature columns with trainable `scale` and
/// `shift` row vectors (`1xC` nodes, typically parameter mounts).
///
/// In [`Phase::Train`] the batch is normalized by its own per-column mean
/// and population variance — both on the tape, so gradients flow through
/// the statistics — and the running statistics in `state` are nudged
/// toward the batch values by `momentum`. In [`Phase::Eval`] the stored
/// running statistics are mounted as constants and `state` is untouched.
pub fn batchnorm(
    graph: &mut Graph,
    x: NodeId,
    scale: NodeId,
    shift: NodeId,
    state: &mut BatchNormState,
    phase: Phase,
) -> Result<NodeId, AutodiffError> {
    let (rows, cols) = graph.value(x).shape();
    if cols != state.features() {
        return Err(AutodiffError::BadShape {
            op: "batchnorm",
            detail: format!("input has {} columns, state tracks {}", cols, state.features()),
        });
    }
    for (node, name) in [(scale, "scale"), (shift, "shift")] {
        if graph.value(node).shape() != (1, cols) {
            return Err(AutodiffError::BadShape {
                op: "batchnorm",
                detail: format!(
                    "{} must be 1x{}, got {:?}",
                    name,
                    cols,
                    graph.value(node).shape()
                ),
            });
        }
    }

    let normalized = match phase {
        Phase::Train => {
            if rows < 2 {
                return Err(AutodiffError::BatchTooSmall(rows));
            }
            let mean = graph.mean_rows(x)?;
            let neg_mean = graph.neg(mean);
            let centered = graph.add_row(x, neg_mean)?;
            let squared = graph.mul(centered, centered)?;
            let var = graph.mean_rows(squared)?;
            let shifted_var = graph.add_scalar(var, state.epsilon);
            let denom = graph.sqrt(shifted_var);

            let m = state.momentum;
            for j in 0..cols {
                let bm = graph.value(mean).data()[j];
                let bv = graph.value(var).data()[j];
                let rm = state.running_mean.data()[j];
                let rv = state.running_var.data()[j];
                state.running_mean.data_mut()[j] = (1.0 - m) * rm + m * bm;
                state.running_var.data_mut()[j] = (1.0 - m) * rv + m * bv;
            }

            graph.div_row(centered, denom)?
        }
        Phase::Eval => {
            let mut denom = Tensor::zeros(1, cols);
            for j in 0..cols {
                denom.data_mut()[j] = (state.running_var.data()[j] + state.epsilon).sqrt();
            }
            let neg_mean = {
                let mut m = state.running_mean.clone();
                for v in m.data_mut() {
                    *v = -*v;
                }
                graph.constant(m)
            };
            let denom = graph.constant(denom);
            let centered = graph.add_row(x, neg_mean)?;
            graph.div_row(centered, denom)?
        }
    };
    let scaled = graph.mul_row(normalized, scale)?;
    graph.add_row(scaled, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig, ParamSet};

    fn batch() -> Tensor {
        Tensor::from_rows(&[
            vec![1.0, -2.0],
            vec![3.0, 0.5],
            vec![-1.0, 2.5],
            vec![5.0, -3.0],
        ])
        .unwrap()
    }

    #[test]
    fn train_output_has_zero_mean_unit_variance_before_affine() {
        let mut params = ParamSet::new();
        let scale = params.register("scale", Tensor::filled(1, 2, 1.0)).unwrap();
        let shift = params.register("shift", Tensor::zeros(1, 2)).unwrap();
        let mut state = BatchNormState::new(2);

        let mut g = Graph::new();
        let x = g.constant(batch());
        let sc = g.param(&params, scale);
        let sh = g.param(&params, shift);
        let y = batchnorm(&mut g, x, sc, sh, &mut state, Phase::Train).unwrap();

        let v = g.value(y);
        for j in 0..2 {
            let mean: f64 = (0..4).map(|i| v.get(i, j)).sum::<f64>() / 4.0;
            let var: f64 = (0..4).map(|i| (v.get(i, j) - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12, "column {j} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "column {j} variance {var}");
        }
    }

    #[test]
    fn train_mode_rejects_single_row_batches() {
        let mut params = ParamSet::new();
        let scale = params.register("scale", Tensor::filled(1, 2, 1.0)).unwrap();
        let shift = params.register("shift", Tensor::zeros(1, 2)).unwrap();
        let mut state = BatchNormState::new(2);
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let sc = g.param(&params, scale);
        let sh = g.param(&params, shift);
        let err = batchnorm(&mut g, x, sc, sh, &mut state, Phase::Train).unwrap_err();
        assert!(matches!(err, AutodiffError::BatchTooSmall(1)));
    }

    #[test]
    fn running_stats_use_population_variance() {
        let mut params = ParamSet::new();
        let scale = params.register("scale", Tensor::filled(1, 2, 1.0)).unwrap();
        let shift = params.register("shift", Tensor::zeros(1, 2)).unwrap();
        let mut state = BatchNormState::new(2);

        let data = batch();
        let mut g = Graph::new();
        let x = g.constant(data.clone());
        let sc = g.param(&params, scale);
        let sh = g.param(&params, shift);
        batchnorm(&mut g, x, sc, sh, &mut state, Phase::Train).unwrap();

        for j in 0..2 {
            let col: Vec<f64> = (0..4).map(|i| data.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let pop_var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            let expect_mean = 0.9 * 0.0 + 0.1 * mean;
            let expect_var = 0.9 * 1.0 + 0.1 * pop_var;
            assert!(
                (state.running_mean().data()[j] - expect_mean).abs() < 1e-12,
                "column {j} running mean"
            );
            assert!(
                (state.running_var().data()[j] - expect_var).abs() < 1e-12,
                "column {j} running variance (population, not sample)"
            );
        }
    }

    #[test]
    fn eval_converges_to_train_output_on_a_repeated_batch() {
        let mut params = ParamSet::new();
        let scale = params.register("scale", Tensor::row(vec![1.3, 0.7])).unwrap();
        let shift = params.register("shift", Tensor::row(vec![-0.2, 0.4])).unwrap();
        let mut state = BatchNormState::new(2);

        let mut train_out = Tensor::zeros(4, 2);
        for _ in 0..300 {
            let mut g = Graph::new();
            let x = g.constant(batch());
            let sc = g.param(&params, scale);
            let sh = g.param(&params, shift);
            let y = batchnorm(&mut g, x, sc, sh, &mut state, Phase::Train).unwrap();
            train_out = g.value(y).clone();
        }

        let mut g = Graph::new();
        let x = g.constant(batch());
        let sc = g.param(&params, scale);
        let sh = g.param(&params, shift);
        let y = batchnorm(&mut g, x, sc, sh, &mut state, Phase::Eval).unwrap();
        for (e, t) in g.value(y).data().iter().zip(train_out.data()) {
            assert!(
                (e - t).abs() < 1e-6,
                "eval {e} vs train {t}: running stats should converge to batch stats"
            );
        }
    }

    #[test]
    fn eval_mode_leaves_state_untouched() {
        let mut params = ParamSet::new();
        let scale = params.register("scale", Tensor::filled(1, 2, 1.0)).unwrap();
        let shift = params.register("shift", Tensor::zeros(1, 2)).unwrap();
        let mut state = BatchNormState::new(2);
        let before_mean = state.running_mean().clone();
        let before_var = state.running_var().clone();

        let mut g = Graph::new();
        let x = g.constant(batch());
        let sc = g.param(&params, scale);
        let sh = g.param(&params, shift);
        batchnorm(&mut g, x, sc, sh, &mut state, Phase::Eval).unwrap();

        assert_eq!(state.running_mean().data(), before_mean.data());
        assert_eq!(state.running_var().data(), before_var.data());
    }

    #[test]
    fn gradients_flow_through_batch_statistics() {
        let config = GradCheckConfig::default();
        let mut params = ParamSet::new();
        let xp = params.register("x", batch()).unwrap();
        let scale = params.register("scale", Tensor::row(vec![1.1, 0.9])).unwrap();
        let shift = params.register("shift", Tensor::row(vec![0.1, -0.3])).unwrap();
        // Fixed weights make the loss sensitive to every output entry.
        let weights =
            Tensor::from_vec(4, 2, (0..8).map(|i| 0.25 * i as f64 - 0.9).collect()).unwrap();

        let report = grad_check(&mut params, &config, |ps| {
            let mut state = BatchNormState::new(2);
            let mut g = Graph::new();
            let x = g.param(ps, xp);
            let sc = g.param(ps, scale);
            let sh = g.param(ps, shift);
            let y = batchnorm(&mut g, x, sc, sh, &mut state, Phase::Train)?;
            let w = g.constant(weights.clone());
            let p = g.mul(y, w)?;
            let loss = g.mean_all(p)?;
            Ok((g, loss))
        })
        .unwrap();
        assert!(
            report.max_rel_err < 1e-6,
            "max rel err {:.3e} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
