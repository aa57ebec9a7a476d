use rand::Rng;

use crate::autodiff::Tensor;

/// Xavier/Glorot uniform initialization: entries drawn from
/// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`, where the fans are
/// the matrix dimensions. Keeps activation variance roughly constant
/// through tanh/sigmoid layers at the start of training.
pub(crate) fn xavier_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
    t
}
