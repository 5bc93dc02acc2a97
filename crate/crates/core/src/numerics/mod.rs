//! Dense tensors with reverse-mode differentiation.

mod gradcheck;
mod params;
mod real;
mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, relative_error};
pub use params::{Graph, ParamGrads, ParamId, ParamStore};
pub use real::Real;
pub use rng::{standard_normal, StreamRng, Streams};
pub use tape::{Grads, Tape, Var, LAYER_NORM_EPS};
pub use tensor::{Tensor, TensorError, TensorResult};

/// Additive value used to mask attention logits.
pub const MASK_NEG: f64 = -1e9;

/// Additive causal mask `[n, n]`: position `i` may attend to `j <= i`.
pub fn causal_mask<F: Real>(n: usize) -> Tensor<F> {
    let mut m = Tensor::zeros([n, n]);
    let neg = F::from_f64_lossy(MASK_NEG);
    for i in 0..n {
        for j in i + 1..n {
            m.data_mut()[i * n + j] = neg;
        }
    }
    m
}
