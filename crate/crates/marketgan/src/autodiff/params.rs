use std::collections::HashMap;

use super::tensor::Tensor;
use super::AutodiffError;

/// Handle to a parameter registered in a [`ParamSet`].
///
/// Handles are only issued by [`ParamSet::register`]; using one against a
/// different set is a bug and panics on the out-of-range index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ParamId(pub(crate) usize);

struct Param {
    name: String,
    value: Tensor,
    grad: Tensor,
}

/// Named trainable tensors together with their gradient accumulators.
///
/// Storage is a `Vec` in registration order so that iteration, optimizer
/// updates, and serialization are all deterministic; the name map exists
/// only for lookups. Gradients accumulate additively across backward
/// passes until [`ParamSet::zero_grads`] is called.
#[derive(Default)]
pub struct ParamSet {
    entries: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under a unique name and returns its handle.
    pub fn register(&mut self, name: &str, value: Tensor) -> Result<ParamId, AutodiffError> {
        if self.by_name.contains_key(name) {
            return Err(AutodiffError::DuplicateParam(name.to_string()));
        }
        let id = ParamId(self.entries.len());
        let (rows, cols) = value.shape();
        self.entries.push(Param {
            name: name.to_string(),
            grad: Tensor::zeros(rows, cols),
            value,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, AutodiffError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    /// Adds `delta` into the gradient accumulator for `id`.
    pub fn accumulate_grad(&mut self, id: ParamId, delta: &Tensor) -> Result<(), AutodiffError> {
        let entry = &mut self.entries[id.0];
        if entry.grad.shape() != delta.shape() {
            return Err(AutodiffError::BadShape {
                op: "accumulate_grad",
                detail: format!(
                    "parameter `{}` is {:?} but delta is {:?}",
                    entry.name,
                    entry.grad.shape(),
                    delta.shape()
                ),
            });
        }
        for (g, d) in entry.grad.data_mut().iter_mut().zip(delta.data()) {
            *g += d;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.fill(0.0);
        }
    }

    /// Number of registered parameters.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all parameters.
    pub fn total_values(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    /// Handles in registration order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// Largest absolute value over every parameter entry.
    pub fn max_abs_value(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |m, p| m.max(p.value.max_abs()))
    }
}

impl Clone for ParamSet {
    fn clone(&self) -> Self {
        let mut out = ParamSet::new();
        for p in &self.entries {
            let id = out
                .register(&p.name, p.value.clone())
                .expect("names in a ParamSet are unique");
            out.entries[id.0].grad = p.grad.clone();
        }
        out
    }
}
