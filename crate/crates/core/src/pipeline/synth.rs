use rand::Rng;

use super::synthetic::TrainingExample;
use crate::locdit::sample_patch;
use crate::model::{stack_patches, LatentPatch, ModelState};
use crate::numerics::{Graph, Real};
use crate::{Error, Result};

pub const DEFAULT_CFG_SCALE: f64 = 2.5;
pub const DEFAULT_SAMPLING_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub cfg_scale: f64,
    pub steps: usize,
    /// Cap on the total history (reference plus generated), further limited by the model's own cap.
    pub max_patches: Option<usize>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            cfg_scale: DEFAULT_CFG_SCALE,
            steps: DEFAULT_SAMPLING_STEPS,
            max_patches: None,
        }
    }
}

/// Autoregressive generation. The reference patches prime the history and
/// are not returned. Every step emits one patch; generation ends after the
/// first patch whose stop probability exceeds 0.5, or when the history is full.
pub fn synthesize<F: Real, R: Rng + ?Sized>(
    state: &ModelState<F>,
    tokens: &[usize],
    reference: &[LatentPatch],
    options: &SynthesisOptions,
    rng: &mut R,
) -> Result<Vec<LatentPatch>> {
    let c = state.config();
    state.model.check_tokens(tokens)?;
    let cap = options.max_patches.map_or(c.max_patches, |m| m.min(c.max_patches));
    if cap == 0 {
        return Err(Error::InvalidInput("patch cap must be positive".into()));
    }
    if reference.len() >= cap {
        return Err(Error::InvalidInput(format!(
            "reference of {} patches leaves no room under the cap of {cap}",
            reference.len()
        )));
    }
    if let Some(p) = reference.iter().find(|p| p.len() != c.d_patch) {
        return Err(Error::InvalidInput(format!(
            "reference patch has length {}, expected {}",
            p.len(),
            c.d_patch
        )));
    }
    let mut history = reference.to_vec();
    let mut generated = Vec::new();
    loop {
        let hidden = state.step_hiddens(tokens, &history)?;
        let z_prev = history
            .last()
            .map_or_else(|| vec![F::zero(); c.d_patch], LatentPatch::to_real);
        let z = sample_patch(state, &hidden.h_final, &z_prev, options.steps, options.cfg_scale, rng)?;
        let patch = LatentPatch::from_real(&z)?;
        history.push(patch.clone());
        generated.push(patch);
        if hidden.stop_logit > F::zero() || history.len() >= cap {
            return Ok(generated);
        }
    }
}

/// Correct and total stop decisions when the ground-truth history is fed in.
pub fn stop_accuracy<F: Real>(state: &ModelState<F>, example: &TrainingExample) -> Result<(usize, usize)> {
    let n = example.patches.len();
    let mut g = Graph::frozen(&state.params);
    let history = if n > 1 {
        Some(g.constant(stack_patches::<F>(&example.patches[..n - 1], state.config().d_patch)?))
    } else {
        None
    };
    let vars = state.model.hierarchy(&mut g, &example.text_tokens, history)?;
    let correct = g
        .value(vars.stop_logits)
        .data()
        .iter()
        .zip(&example.stop_labels)
        .filter(|(l, &label)| (**l > F::zero()) == label)
        .count();
    Ok((correct, n))
}
