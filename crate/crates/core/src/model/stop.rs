use super::layers::{Builder, Linear};
use crate::numerics::{Graph, Real, Var};
use crate::Result;

/// Linear end-of-sequence head over the quantized skeleton.
#[derive(Debug, Clone)]
pub struct StopHead {
    pub linear: Linear,
}

impl StopHead {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, d_model: usize) -> Self {
        Self {
            linear: Linear::new(b, "stop.linear", d_model, 1),
        }
    }

    /// `[n, d] → [n, 1]` logits.
    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, h_fsq: Var) -> Result<Var> {
        self.linear.forward(g, h_fsq)
    }
}
