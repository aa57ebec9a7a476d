use super::params::{ParamId, ParamSet};
use super::tensor::Tensor;
use super::AutodiffError;

/// Handle to a node in a [`Graph`] tape.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

enum Op {
    Constant,
    Param(ParamId),
    Matmul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    DivRow(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Neg(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Sqrt(NodeId),
    Abs(NodeId),
    LeakyRelu(NodeId, f64),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    SoftmaxRows(NodeId),
    MeanAll(NodeId),
    SumAll(NodeId),
    MeanRows(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SliceRows(NodeId, usize, usize),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Reverse-mode expression tape over dense `f64` matrices.
///
/// Builder methods evaluate eagerly, append a node, and hand back a
/// [`NodeId`]; [`Graph::backward`] replays the tape in reverse and adds
/// gradients into the mounted parameters. Parameters are mounted by copy
/// with [`Graph::param`], so a graph never borrows the [`ParamSet`] it was
/// built from. Every kernel iterates in a fixed order, which makes forward
/// values and gradients bit-identical across runs.
pub struct Graph {
    nodes: Vec<Node>,
    min_kink_distance: f64,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            min_kink_distance: f64::INFINITY,
        }
    }

    /// Value computed for a node during the forward pass.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Number of nodes on the tape.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest `|input entry|` seen by any kinked activation (`abs`,
    /// `leaky_relu`) while building this graph; infinite if none ran.
    ///
    /// Finite-difference checks use this to skip evaluations that landed
    /// too close to a point of non-differentiability.
    pub fn min_kink_distance(&self) -> f64 {
        self.min_kink_distance
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        id
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn note_kinks(&mut self, input: &Tensor) {
        for &x in input.data() {
            let d = x.abs();
            if d < self.min_kink_distance {
                self.min_kink_distance = d;
            }
        }
    }

    /// Mounts a fixed tensor; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Mounts a `1x1` constant.
    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(Tensor::scalar(value))
    }

    /// Mounts a parameter by copying its current value; `backward`
    /// accumulates the gradient for every mount of the same parameter.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(params.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(AutodiffError::BadShape {
                op: "matmul",
                detail: format!("{}x{} times {}x{}", ar, ac, br, bc),
            });
        }
        let mut out = Tensor::zeros(ar, bc);
        {
            let (av, bv) = (self.nodes[a.0].value.data(), self.nodes[b.0].value.data());
            let ov = out.data_mut();
            for i in 0..ar {
                for k in 0..ac {
                    let aik = av[i * ac + k];
                    let brow = &bv[k * bc..(k + 1) * bc];
                    let orow = &mut ov[i * bc..(i + 1) * bc];
                    for (o, bkj) in orow.iter_mut().zip(brow) {
                        *o += aik * bkj;
                    }
                }
            }
        }
        Ok(self.push(out, Op::Matmul(a, b)))
    }

    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId, AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(AutodiffError::BadShape {
                op: name,
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        let (rows, cols) = self.shape(a);
        let mut out = Tensor::zeros(rows, cols);
        for ((o, &x), &y) in out
            .data_mut()
            .iter_mut()
            .zip(self.nodes[a.0].value.data())
            .zip(self.nodes[b.0].value.data())
        {
            *o = f(x, y);
        }
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.binary_same_shape("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    fn check_row_operand(
        &self,
        name: &'static str,
        a: NodeId,
        row: NodeId,
    ) -> Result<(usize, usize), AutodiffError> {
        let (rows, cols) = self.shape(a);
        if self.shape(row) != (1, cols) {
            return Err(AutodiffError::BadShape {
                op: name,
                detail: format!("{}x{} with row operand {:?}", rows, cols, self.shape(row)),
            });
        }
        Ok((rows, cols))
    }

    fn row_broadcast(
        &mut self,
        name: &'static str,
        a: NodeId,
        row: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.check_row_operand(name, a, row)?;
        let mut out = Tensor::zeros(rows, cols);
        {
            let av = self.nodes[a.0].value.data();
            let rv = self.nodes[row.0].value.data();
            for i in 0..rows {
                for j in 0..cols {
                    out.data_mut()[i * cols + j] = f(av[i * cols + j], rv[j]);
                }
            }
        }
        Ok(self.push(out, op))
    }

    /// Adds a `1xC` row vector to every row of an `RxC` matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, AutodiffError> {
        self.row_broadcast("add_row", a, row, |x, r| x + r, Op::AddRow(a, row))
    }

    /// Multiplies every row of an `RxC` matrix by a `1xC` row vector.
    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, AutodiffError> {
        self.row_broadcast("mul_row", a, row, |x, r| x * r, Op::MulRow(a, row))
    }

    /// Divides every row of an `RxC` matrix by a `1xC` row vector.
    pub fn div_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, AutodiffError> {
        self.row_broadcast("div_row", a, row, |x, r| x / r, Op::DivRow(a, row))
    }

    /// Multiplies every column of an `RxC` matrix by an `Rx1` column vector.
    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.shape(a);
        if self.shape(col) != (rows, 1) {
            return Err(AutodiffError::BadShape {
                op: "mul_col",
                detail: format!("{}x{} with column operand {:?}", rows, cols, self.shape(col)),
            });
        }
        let mut out = Tensor::zeros(rows, cols);
        {
            let av = self.nodes[a.0].value.data();
            let cv = self.nodes[col.0].value.data();
            for i in 0..rows {
                for j in 0..cols {
                    out.data_mut()[i * cols + j] = av[i * cols + j] * cv[i];
                }
            }
        }
        Ok(self.push(out, Op::MulCol(a, col)))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let (rows, cols) = self.shape(a);
        let mut out = Tensor::zeros(rows, cols);
        for (o, &x) in out.data_mut().iter_mut().zip(self.nodes[a.0].value.data()) {
            *o = f(x);
        }
        self.push(out, op)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    /// Elementwise square root; callers are expected to keep inputs
    /// strictly positive (e.g. by an epsilon shift) so the gradient stays
    /// finite.
    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::sqrt, Op::Sqrt(a))
    }

    /// Elementwise absolute value; the subgradient at zero is taken as 0.
    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let input = self.nodes[a.0].value.clone();
        self.note_kinks(&input);
        self.unary(a, f64::abs, Op::Abs(a))
    }

    /// `x` for `x >= 0`, `slope * x` otherwise; the derivative at zero is
    /// taken from the non-negative branch.
    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let input = self.nodes[a.0].value.clone();
        self.note_kinks(&input);
        self.unary(
            a,
            |x| if x >= 0.0 { x } else { slope * x },
            Op::LeakyRelu(a, slope),
        )
    }

    /// Multiplies every entry by a fixed constant.
    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        self.unary(a, |x| x * k, Op::Scale(a, k))
    }

    /// Adds a fixed constant to every entry.
    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> NodeId {
        self.unary(a, |x| x + k, Op::AddScalar(a))
    }

    /// Softmax across each row (shift-stabilized).
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (rows, cols) = self.shape(a);
        let mut out = Tensor::zeros(rows, cols);
        {
            let av = self.nodes[a.0].value.data();
            for i in 0..rows {
                let row = &av[i * cols..(i + 1) * cols];
                let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
                let mut sum = 0.0;
                for j in 0..cols {
                    let e = (row[j] - max).exp();
                    out.data_mut()[i * cols + j] = e;
                    sum += e;
                }
                for j in 0..cols {
                    out.data_mut()[i * cols + j] /= sum;
                }
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Mean over every entry, producing a `1x1` tensor.
    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let t = &self.nodes[a.0].value;
        if t.is_empty() {
            return Err(AutodiffError::BadShape {
                op: "mean_all",
                detail: "input has no entries".to_string(),
            });
        }
        let mean = t.data().iter().sum::<f64>() / t.len() as f64;
        Ok(self.push(Tensor::scalar(mean), Op::MeanAll(a)))
    }

    /// Sum over every entry, producing a `1x1` tensor.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let sum = self.nodes[a.0].value.data().iter().sum::<f64>();
        self.push(Tensor::scalar(sum), Op::SumAll(a))
    }

    /// Mean across the row axis: `RxC -> 1xC` column means.
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.shape(a);
        if rows == 0 {
            return Err(AutodiffError::BadShape {
                op: "mean_rows",
                detail: "input has no rows".to_string(),
            });
        }
        let mut out = Tensor::zeros(1, cols);
        {
            let av = self.nodes[a.0].value.data();
            for i in 0..rows {
                for j in 0..cols {
                    out.data_mut()[j] += av[i * cols + j];
                }
            }
            for v in out.data_mut() {
                *v /= rows as f64;
            }
        }
        Ok(self.push(out, Op::MeanRows(a)))
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let Some(&first) = parts.first() else {
            return Err(AutodiffError::BadShape {
                op: "concat_cols",
                detail: "no inputs".to_string(),
            });
        };
        let rows = self.shape(first).0;
        let mut total_cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(AutodiffError::BadShape {
                    op: "concat_cols",
                    detail: format!("row counts differ: {} vs {}", rows, r),
                });
            }
            total_cols += c;
        }
        let mut out = Tensor::zeros(rows, total_cols);
        let mut offset = 0;
        for &p in parts {
            let (_, c) = self.shape(p);
            let pv = self.nodes[p.0].value.data();
            for i in 0..rows {
                for j in 0..c {
                    out.data_mut()[i * total_cols + offset + j] = pv[i * c + j];
                }
            }
            offset += c;
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Copies the column range `start..end`.
    pub fn slice_cols(
        &mut self,
        a: NodeId,
        start: usize,
        end: usize,
    ) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.shape(a);
        if start >= end || end > cols {
            return Err(AutodiffError::BadShape {
                op: "slice_cols",
                detail: format!("range {}..{} of {} columns", start, end, cols),
            });
        }
        let width = end - start;
        let mut out = Tensor::zeros(rows, width);
        {
            let av = self.nodes[a.0].value.data();
            for i in 0..rows {
                for j in 0..width {
                    out.data_mut()[i * width + j] = av[i * cols + start + j];
                }
            }
        }
        Ok(self.push(out, Op::SliceCols(a, start, end)))
    }

    /// Copies the row range `start..end`.
    pub fn slice_rows(
        &mut self,
        a: NodeId,
        start: usize,
        end: usize,
    ) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.shape(a);
        if start >= end || end > rows {
            return Err(AutodiffError::BadShape {
                op: "slice_rows",
                detail: format!("range {}..{} of {} rows", start, end, rows),
            });
        }
        let height = end - start;
        let mut out = Tensor::zeros(height, cols);
        out.data_mut()
            .copy_from_slice(&self.nodes[a.0].value.data()[start * cols..end * cols]);
        Ok(self.push(out, Op::SliceRows(a, start, end)))
    }

    /// Runs the reverse sweep from a `1x1` loss node, adding parameter
    /// gradients into `params`. Call [`ParamSet::zero_grads`] first unless
    /// accumulation across graphs is intended.
    pub fn backward(&self, loss: NodeId, params: &mut ParamSet) -> Result<(), AutodiffError> {
        let (lr, lc) = self.shape(loss);
        if (lr, lc) != (1, 1) {
            return Err(AutodiffError::NonScalarLoss { rows: lr, cols: lc });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(pid) => params.accumulate_grad(*pid, &g)?,
                Op::Matmul(a, b) => {
                    let (ar, ac) = self.shape(*a);
                    let bc = self.shape(*b).1;
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    let gv = g.data();
                    // dA = G * B^T
                    let mut da = Tensor::zeros(ar, ac);
                    for i in 0..ar {
                        for k in 0..ac {
                            let mut acc = 0.0;
                            for j in 0..bc {
                                acc += gv[i * bc + j] * bv[k * bc + j];
                            }
                            da.data_mut()[i * ac + k] = acc;
                        }
                    }
                    // dB = A^T * G
                    let mut db = Tensor::zeros(ac, bc);
                    for i in 0..ar {
                        for k in 0..ac {
                            let aik = av[i * ac + k];
                            for j in 0..bc {
                                db.data_mut()[k * bc + j] += aik * gv[i * bc + j];
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    let mut db = g.clone();
                    for v in db.data_mut() {
                        *v = -*v;
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, db);
                }
                Op::Mul(a, b) => {
                    let da = elementwise(&g, self.nodes[b.0].value.data(), |g, y| g * y);
                    let db = elementwise(&g, self.nodes[a.0].value.data(), |g, x| g * x);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Div(a, b) => {
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    let mut da = g.clone();
                    let mut db = g.clone();
                    for (i, (pa, pb)) in da
                        .data_mut()
                        .iter_mut()
                        .zip(db.data_mut().iter_mut())
                        .enumerate()
                    {
                        *pa /= bv[i];
                        *pb *= -av[i] / (bv[i] * bv[i]);
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(a, r) => {
                    let (rows, cols) = self.shape(*a);
                    let mut dr = Tensor::zeros(1, cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            dr.data_mut()[j] += g.data()[i * cols + j];
                        }
                    }
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *r, dr);
                }
                Op::MulRow(a, r) => {
                    let (rows, cols) = self.shape(*a);
                    let av = self.nodes[a.0].value.data();
                    let rv = self.nodes[r.0].value.data();
                    let mut da = Tensor::zeros(rows, cols);
                    let mut dr = Tensor::zeros(1, cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            let gij = g.data()[i * cols + j];
                            da.data_mut()[i * cols + j] = gij * rv[j];
                            dr.data_mut()[j] += gij * av[i * cols + j];
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *r, dr);
                }
                Op::DivRow(a, r) => {
                    let (rows, cols) = self.shape(*a);
                    let av = self.nodes[a.0].value.data();
                    let rv = self.nodes[r.0].value.data();
                    let mut da = Tensor::zeros(rows, cols);
                    let mut dr = Tensor::zeros(1, cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            let gij = g.data()[i * cols + j];
                            da.data_mut()[i * cols + j] = gij / rv[j];
                            dr.data_mut()[j] -= gij * av[i * cols + j] / (rv[j] * rv[j]);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *r, dr);
                }
                Op::MulCol(a, c) => {
                    let (rows, cols) = self.shape(*a);
                    let av = self.nodes[a.0].value.data();
                    let cv = self.nodes[c.0].value.data();
                    let mut da = Tensor::zeros(rows, cols);
                    let mut dc = Tensor::zeros(rows, 1);
                    for i in 0..rows {
                        for j in 0..cols {
                            let gij = g.data()[i * cols + j];
                            da.data_mut()[i * cols + j] = gij * cv[i];
                            dc.data_mut()[i] += gij * av[i * cols + j];
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *c, dc);
                }
                Op::Neg(a) => {
                    let mut da = g;
                    for v in da.data_mut() {
                        *v = -*v;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Tanh(a) => {
                    let da = elementwise(&g, self.nodes[i].value.data(), |g, y| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let da = elementwise(&g, self.nodes[i].value.data(), |g, y| g * y * (1.0 - y));
                    accumulate(&mut grads, *a, da);
                }
                Op::Exp(a) => {
                    let da = elementwise(&g, self.nodes[i].value.data(), |g, y| g * y);
                    accumulate(&mut grads, *a, da);
                }
                Op::Sqrt(a) => {
                    let da = elementwise(&g, self.nodes[i].value.data(), |g, y| g / (2.0 * y));
                    accumulate(&mut grads, *a, da);
                }
                Op::Abs(a) => {
                    let da = elementwise(&g, self.nodes[a.0].value.data(), |g, x| {
                        if x > 0.0 {
                            g
                        } else if x < 0.0 {
                            -g
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::LeakyRelu(a, slope) => {
                    let slope = *slope;
                    let da = elementwise(&g, self.nodes[a.0].value.data(), |g, x| {
                        if x >= 0.0 {
                            g
                        } else {
                            g * slope
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::Scale(a, k) => {
                    let k = *k;
                    let mut da = g;
                    for v in da.data_mut() {
                        *v *= k;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::AddScalar(a) => {
                    accumulate(&mut grads, *a, g);
                }
                Op::SoftmaxRows(a) => {
                    let (rows, cols) = self.shape(*a);
                    let yv = self.nodes[i].value.data();
                    let mut da = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        let mut dot = 0.0;
                        for j in 0..cols {
                            dot += g.data()[r * cols + j] * yv[r * cols + j];
                        }
                        for j in 0..cols {
                            da.data_mut()[r * cols + j] =
                                yv[r * cols + j] * (g.data()[r * cols + j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MeanAll(a) => {
                    let (rows, cols) = self.shape(*a);
                    let share = g.data()[0] / (rows * cols) as f64;
                    accumulate(&mut grads, *a, Tensor::filled(rows, cols, share));
                }
                Op::SumAll(a) => {
                    let (rows, cols) = self.shape(*a);
                    accumulate(&mut grads, *a, Tensor::filled(rows, cols, g.data()[0]));
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = self.shape(*a);
                    let mut da = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        for j in 0..cols {
                            da.data_mut()[r * cols + j] = g.data()[j] / rows as f64;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let (rows, total_cols) = self.nodes[i].value.shape();
                    let mut offset = 0;
                    for &p in parts {
                        let (_, c) = self.shape(p);
                        let mut dp = Tensor::zeros(rows, c);
                        for r in 0..rows {
                            for j in 0..c {
                                dp.data_mut()[r * c + j] =
                                    g.data()[r * total_cols + offset + j];
                            }
                        }
                        accumulate(&mut grads, p, dp);
                        offset += c;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let (rows, cols) = self.shape(*a);
                    let width = end - start;
                    let mut da = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        for j in 0..width {
                            da.data_mut()[r * cols + start + j] = g.data()[r * width + j];
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::SliceRows(a, start, end) => {
                    let (rows, cols) = self.shape(*a);
                    let mut da = Tensor::zeros(rows, cols);
                    da.data_mut()[start * cols..end * cols].copy_from_slice(g.data());
                    accumulate(&mut grads, *a, da);
                }
            }
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn elementwise(g: &Tensor, other: &[f64], f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (rows, cols) = g.shape();
    let mut out = Tensor::zeros(rows, cols);
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        *o = f(g.data()[i], other[i]);
    }
    out
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
    match &mut grads[id.0] {
        Some(t) => {
            for (a, b) in t.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}
