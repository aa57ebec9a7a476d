use super::params::ParamSet;
use super::tensor::Tensor;
use super::AutodiffError;

/// RMSprop settings; `decay` is the squared-gradient running-average
/// coefficient and `epsilon` stabilizes the denominator.
#[derive(Clone, Debug)]
pub struct RmspropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl RmspropConfig {
    /// Standard coefficients with a caller-chosen step size.
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        RmspropConfig {
            learning_rate,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter squared-gradient accumulators, aligned index-for-index
/// with the [`ParamSet`] the state was created from.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    accum: Vec<Tensor>,
}

impl OptimizerState {
    /// Zeroed accumulators shaped like each parameter.
    pub fn new(params: &ParamSet) -> Self {
        let accum = params
            .ids()
            .map(|id| {
                let (r, c) = params.value(id).shape();
                Tensor::zeros(r, c)
            })
            .collect();
        OptimizerState { accum }
    }

    /// Accumulators in parameter-registration order (for serialization).
    pub fn accumulators(&self) -> &[Tensor] {
        &self.accum
    }

    /// Rebuilds state from serialized accumulators; shapes are validated
    /// against `params` on the next [`rmsprop_step`].
    pub fn from_accumulators(accum: Vec<Tensor>) -> Self {
        OptimizerState { accum }
    }
}

/// One RMSprop update over every parameter:
/// `v <- decay * v + (1 - decay) * g^2`, then
/// `theta <- theta - lr * g / (sqrt(v) + epsilon)`.
///
/// Gradients are read from the accumulators in `params` and left
/// untouched; callers zero them when starting the next pass.
pub fn rmsprop_step(
    params: &mut ParamSet,
    state: &mut OptimizerState,
    config: &RmspropConfig,
) -> Result<(), AutodiffError> {
    if state.accum.len() != params.len() {
        return Err(AutodiffError::BadShape {
            op: "rmsprop_step",
            detail: format!(
                "state tracks {} parameters but the set has {}",
                state.accum.len(),
                params.len()
            ),
        });
    }
    for (id, v) in params.ids().zip(state.accum.iter_mut()) {
        if v.shape() != params.value(id).shape() {
            return Err(AutodiffError::BadShape {
                op: "rmsprop_step",
                detail: format!(
                    "accumulator for `{}` is {:?} but the parameter is {:?}",
                    params.name(id),
                    v.shape(),
                    params.value(id).shape()
                ),
            });
        }
        let grad = params.grad(id).clone();
        for (vi, gi) in v.data_mut().iter_mut().zip(grad.data()) {
            *vi = config.decay * *vi + (1.0 - config.decay) * gi * gi;
        }
        for ((ti, vi), gi) in params
            .value_mut(id)
            .data_mut()
            .iter_mut()
            .zip(v.data())
            .zip(grad.data())
        {
            *ti -= config.learning_rate * gi / (vi.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_closed_form() {
        // With v0 = 0: v1 = 0.1 * g^2, update = lr * g / (sqrt(v1) + eps).
        let mut params = ParamSet::new();
        let id = params.register("w", Tensor::row(vec![1.0, -2.0])).unwrap();
        params
            .accumulate_grad(id, &Tensor::row(vec![0.5, -0.3]))
            .unwrap();
        let mut state = OptimizerState::new(&params);
        let config = RmspropConfig::with_learning_rate(0.01);
        rmsprop_step(&mut params, &mut state, &config).unwrap();

        for (i, (&w, &g)) in [1.0, -2.0].iter().zip(&[0.5, -0.3]).enumerate() {
            let v: f64 = 0.1 * g * g;
            let expected = w - 0.01 * g / (v.sqrt() + 1e-8);
            let got = params.value(id).data()[i];
            assert!(
                (got - expected).abs() < 1e-15,
                "entry {i}: got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn decay_accumulates_across_steps() {
        let mut params = ParamSet::new();
        let id = params.register("w", Tensor::scalar(0.0)).unwrap();
        let mut state = OptimizerState::new(&params);
        let config = RmspropConfig::with_learning_rate(0.1);

        params.accumulate_grad(id, &Tensor::scalar(1.0)).unwrap();
        rmsprop_step(&mut params, &mut state, &config).unwrap();
        params.zero_grads();
        params.accumulate_grad(id, &Tensor::scalar(2.0)).unwrap();
        rmsprop_step(&mut params, &mut state, &config).unwrap();

        // v1 = 0.1, v2 = 0.9 * 0.1 + 0.1 * 4 = 0.49.
        let v2 = state.accumulators()[0].data()[0];
        assert!((v2 - 0.49).abs() < 1e-15, "v2 = {v2}");
    }

    #[test]
    fn constant_gradient_moves_at_roughly_learning_rate() {
        // Once v converges to g^2 the step approaches lr * sign(g).
        let mut params = ParamSet::new();
        let id = params.register("w", Tensor::scalar(0.0)).unwrap();
        let mut state = OptimizerState::new(&params);
        let config = RmspropConfig::with_learning_rate(0.01);
        for _ in 0..200 {
            params.zero_grads();
            params.accumulate_grad(id, &Tensor::scalar(3.0)).unwrap();
            rmsprop_step(&mut params, &mut state, &config).unwrap();
        }
        let before = params.value(id).data()[0];
        params.zero_grads();
        params.accumulate_grad(id, &Tensor::scalar(3.0)).unwrap();
        rmsprop_step(&mut params, &mut state, &config).unwrap();
        let movement = before - params.value(id).data()[0];
        assert!(
            (movement - 0.01).abs() < 1e-4,
            "per-step movement {movement} should approach the learning rate"
        );
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut params = ParamSet::new();
        params.register("w", Tensor::zeros(2, 2)).unwrap();
        let mut state = OptimizerState::from_accumulators(vec![]);
        let err = rmsprop_step(&mut params, &mut state, &RmspropConfig::with_learning_rate(0.1))
            .unwrap_err();
        assert!(err.to_string().contains("tracks 0 parameters"), "got {err}");
    }
}
