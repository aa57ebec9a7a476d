use rand::Rng;

use super::init::xavier_uniform;
use super::{Mount, NetworkError};
use crate::autodiff::{Graph, NodeId, ParamId, ParamSet, Tensor};

/// One affine layer `x · W + b` with `W: in×out` and `b: 1×out`.
#[derive(Clone, Debug)]
pub struct DenseParams {
    pub input_dim: usize,
    pub output_dim: usize,
    weight: ParamId,
    bias: ParamId,
}

impl DenseParams {
    /// Registers a Xavier-initialized weight and a zero bias under
    /// `{prefix}.weight` / `{prefix}.bias`.
    pub fn register<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if input_dim == 0 || output_dim == 0 {
            return Err(NetworkError::Config(format!(
                "dense layer `{prefix}` needs positive dimensions, got {input_dim}x{output_dim}"
            )));
        }
        let weight = params.register(
            &format!("{prefix}.weight"),
            xavier_uniform(input_dim, output_dim, rng),
        )?;
        let bias = params.register(&format!("{prefix}.bias"), Tensor::zeros(1, output_dim))?;
        Ok(DenseParams {
            input_dim,
            output_dim,
            weight,
            bias,
        })
    }

    /// Applies the layer to a `B×in` node, yielding `B×out`.
    pub fn apply(
        &self,
        graph: &mut Graph,
        mount: Mount<'_>,
        x: NodeId,
    ) -> Result<NodeId, NetworkError> {
        let w = mount.node(graph, self.weight);
        let b = mount.node(graph, self.bias);
        let xw = graph.matmul(x, w)?;
        Ok(graph.add_row(xw, b)?)
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn applies_affine_map_per_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        let layer = DenseParams::register(&mut params, "test", 2, 3, &mut rng).unwrap();
        // Overwrite with known values: W = [[1,0,2],[0,1,3]], b = [10,20,30].
        let [w, b] = layer.ids();
        *params.value_mut(w) =
            Tensor::from_vec(2, 3, vec![1.0, 0.0, 2.0, 0.0, 1.0, 3.0]).unwrap();
        *params.value_mut(b) = Tensor::row(vec![10.0, 20.0, 30.0]);

        let mut graph = Graph::new();
        let x = graph.constant(Tensor::from_vec(1, 2, vec![2.0, 5.0]).unwrap());
        let y = layer
            .apply(&mut graph, Mount::trainable(&params), x)
            .unwrap();
        assert_eq!(graph.value(y).data(), &[12.0, 25.0, 49.0]);
    }

    #[test]
    fn zero_width_layer_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        assert!(DenseParams::register(&mut params, "bad", 0, 3, &mut rng).is_err());
    }

    #[test]
    fn frozen_mount_accumulates_no_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = ParamSet::new();
        let layer = DenseParams::register(&mut params, "f", 2, 2, &mut rng).unwrap();

        let mut graph = Graph::new();
        let x = graph.constant(Tensor::from_vec(1, 2, vec![1.0, -1.0]).unwrap());
        let y = layer.apply(&mut graph, Mount::frozen(&params), x).unwrap();
        let loss = graph.mean_all(y).unwrap();
        graph.backward(loss, &mut params).unwrap();
        for id in layer.ids() {
            assert!(params.grad(id).data().iter().all(|&g| g == 0.0));
        }
    }
}
