use rand::Rng;

use super::init::xavier_uniform;
use super::{Mount, NetworkError};
use crate::autodiff::{Graph, NodeId, ParamId, ParamSet, Tensor};

/// Gate parameters of one GRU layer: input weights `W_*` (in×hidden),
/// recurrent weights `U_*` (hidden×hidden), and biases `b_*` (1×hidden)
/// for the reset, update, and candidate gates.
#[derive(Clone, Debug)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    w_r: ParamId,
    u_r: ParamId,
    b_r: ParamId,
    w_u: ParamId,
    u_u: ParamId,
    b_u: ParamId,
    w_h: ParamId,
    u_h: ParamId,
    b_h: ParamId,
}

impl GruParams {
    /// Registers the nine weight groups under `{prefix}.w_r`, `{prefix}.u_r`,
    /// …; weights are Xavier-initialized, biases zero.
    pub fn register<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(NetworkError::Config(format!(
                "GRU `{prefix}` needs positive dimensions, got input {input_dim}, hidden {hidden_dim}"
            )));
        }
        let mut weight = |params: &mut ParamSet, name: &str, rows: usize| {
            params.register(
                &format!("{prefix}.{name}"),
                xavier_uniform(rows, hidden_dim, rng),
            )
        };
        let w_r = weight(params, "w_r", input_dim)?;
        let u_r = weight(params, "u_r", hidden_dim)?;
        let b_r = params.register(&format!("{prefix}.b_r"), Tensor::zeros(1, hidden_dim))?;
        let w_u = weight(params, "w_u", input_dim)?;
        let u_u = weight(params, "u_u", hidden_dim)?;
        let b_u = params.register(&format!("{prefix}.b_u"), Tensor::zeros(1, hidden_dim))?;
        let w_h = weight(params, "w_h", input_dim)?;
        let u_h = weight(params, "u_h", hidden_dim)?;
        let b_h = params.register(&format!("{prefix}.b_h"), Tensor::zeros(1, hidden_dim))?;
        Ok(GruParams {
            input_dim,
            hidden_dim,
            w_r,
            u_r,
            b_r,
            w_u,
            u_u,
            b_u,
            w_h,
            u_h,
            b_h,
        })
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_r, self.u_r, self.b_r, self.w_u, self.u_u, self.b_u, self.w_h, self.u_h,
            self.b_h,
        ]
    }
}

/// One GRU step on a batch: `x` is `B×in`, `h_prev` is `B×hidden`.
///
/// ```text
/// r  = σ(x·W_r + h·U_r + b_r)
/// u  = σ(x·W_u + h·U_u + b_u)
/// ĥ  = tanh(x·W_h + (r⊙h)·U_h + b_h)
/// h' = (1−u)⊙h + u⊙ĥ
/// ```
pub fn gru_cell(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &GruParams,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId, NetworkError> {
    let (bx, in_dim) = graph.value(x).shape();
    let (bh, hid) = graph.value(h_prev).shape();
    if in_dim != params.input_dim || hid != params.hidden_dim || bx != bh {
        return Err(NetworkError::Config(format!(
            "gru_cell expects x B×{} and h B×{}, got {}x{} and {}x{}",
            params.input_dim, params.hidden_dim, bx, in_dim, bh, hid
        )));
    }

    let gate = |graph: &mut Graph, w, u, b, h_in| -> Result<NodeId, NetworkError> {
        let w = mount.node(graph, w);
        let u = mount.node(graph, u);
        let b = mount.node(graph, b);
        let xw = graph.matmul(x, w)?;
        let hu = graph.matmul(h_in, u)?;
        let sum = graph.add(xw, hu)?;
        Ok(graph.add_row(sum, b)?)
    };

    let r_pre = gate(graph, params.w_r, params.u_r, params.b_r, h_prev)?;
    let r = graph.sigmoid(r_pre);
    let u_pre = gate(graph, params.w_u, params.u_u, params.b_u, h_prev)?;
    let u = graph.sigmoid(u_pre);
    let gated_h = graph.mul(r, h_prev)?;
    let cand_pre = gate(graph, params.w_h, params.u_h, params.b_h, gated_h)?;
    let cand = graph.tanh(cand_pre);

    // h' = h + u ⊙ (ĥ − h), algebraically (1−u)⊙h + u⊙ĥ.
    let delta = graph.sub(cand, h_prev)?;
    let step = graph.mul(u, delta)?;
    Ok(graph.add(h_prev, step)?)
}

/// Unrolls a GRU over a sequence from a zero initial state, returning
/// every hidden state in step order.
pub fn gru_sequence(
    graph: &mut Graph,
    mount: Mount<'_>,
    params: &GruParams,
    xs: &[NodeId],
) -> Result<Vec<NodeId>, NetworkError> {
    let Some(&first) = xs.first() else {
        return Err(NetworkError::Config("GRU sequence is empty".into()));
    };
    let batch = graph.value(first).rows();
    let mut h = graph.constant(Tensor::zeros(batch, params.hidden_dim));
    let mut states = Vec::with_capacity(xs.len());
    for &x in xs {
        h = gru_cell(graph, mount, params, x, h)?;
        states.push(h);
    }
    Ok(states)
}
