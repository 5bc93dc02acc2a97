use super::layers::{Builder, Linear};
use crate::numerics::{Graph, Real, Var};
use crate::Result;

/// Per-patch two-layer MLP: `d_patch → d_model → d_model`.
///
/// Each embedding depends on its own patch only.
#[derive(Debug, Clone)]
pub struct LocEnc {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl LocEnc {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, d_patch: usize, d_model: usize) -> Self {
        Self {
            fc1: Linear::new(b, "loc_enc.fc1", d_patch, d_model),
            fc2: Linear::new(b, "loc_enc.fc2", d_model, d_model),
        }
    }

    /// `[n, d_patch] → [n, d_model]`.
    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, patches: Var) -> Result<Var> {
        let h = self.fc1.forward(g, patches)?;
        let h = g.gelu(h);
        self.fc2.forward(g, h)
    }
}
