use rand::Rng;
use rand_distr::StandardNormal;

use super::NetworkError;
use crate::autodiff::Tensor;

/// The generator's noise source: i.i.d. standard Gaussian components.
///
/// By default one `d_z`-vector is drawn per window and repeated at every
/// time step; the per-step variant draws a fresh vector for each of the
/// `w` steps instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseSpec {
    dim: usize,
    per_step: bool,
}

impl NoiseSpec {
    /// One draw per window, shared across all time steps.
    pub fn shared(dim: usize) -> Result<Self, NetworkError> {
        if dim == 0 {
            return Err(NetworkError::Config(
                "noise dimension must be at least 1".into(),
            ));
        }
        Ok(NoiseSpec {
            dim,
            per_step: false,
        })
    }

    /// A fresh draw for every time step.
    pub fn per_step(dim: usize) -> Result<Self, NetworkError> {
        Ok(NoiseSpec {
            per_step: true,
            ..Self::shared(dim)?
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_per_step(&self) -> bool {
        self.per_step
    }

    /// Samples noise for a batch of windows: a vec of `B×d_z` tensors,
    /// length 1 when shared, `window` when per-step.
    pub fn sample<R: Rng>(&self, batch: usize, window: usize, rng: &mut R) -> Vec<Tensor> {
        let draws = if self.per_step { window } else { 1 };
        (0..draws)
            .map(|_| {
                let mut t = Tensor::zeros(batch, self.dim);
                for v in t.data_mut() {
                    *v = rng.sample(StandardNormal);
                }
                t
            })
            .collect()
    }

    /// All-zero noise of the same shape as [`NoiseSpec::sample`] — the
    /// deterministic deployment default.
    pub fn zeros(&self, batch: usize, window: usize) -> Vec<Tensor> {
        let draws = if self.per_step { window } else { 1 };
        (0..draws).map(|_| Tensor::zeros(batch, self.dim)).collect()
    }
}
