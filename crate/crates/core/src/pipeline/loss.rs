//! Joint objective: flow matching on every patch plus λ-weighted stop BCE.

use rand::Rng;

use super::synthetic::TrainingExample;
use crate::model::{stack_patches, LatentPatch, Model};
use crate::numerics::{standard_normal, Graph, Real, Tape, Tensor, Var};
use crate::{Error, Result};

/// Mean BCE-with-logits over a sequence of stop decisions.
pub fn stop_loss<F: Real>(logits: &[F], labels: &[bool]) -> Result<F> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "stop_loss: {} logits for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let mut tape = Tape::new();
    let l = tape.constant(Tensor::vector(logits.to_vec())?);
    let loss = tape.bce_with_logits(l, &bool_targets(labels))?;
    Ok(tape.value(loss).item()?)
}

fn bool_targets<F: Real>(labels: &[bool]) -> Vec<F> {
    labels
        .iter()
        .map(|&b| if b { F::one() } else { F::zero() })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    pub total: f64,
    pub fm: f64,
    pub stop: f64,
    /// Whether the conditioning fed to the diffusion head was dropped.
    pub cond_dropped: bool,
}

/// Stochastic draws behind one [`total_loss`] evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDraws {
    pub cond_dropped: bool,
    pub t: Vec<f64>,
    pub eps: Vec<f64>,
}

impl LossDraws {
    /// Per-sequence conditioning drop, then one `t ~ U[0, 1)` and one `ε ~ N(0, I)` per patch.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n_patches: usize, d_patch: usize, drop_prob: f64) -> Self {
        let cond_dropped = rng.random::<f64>() < drop_prob;
        let t = (0..n_patches).map(|_| rng.random::<f64>()).collect();
        let eps = standard_normal(rng, n_patches * d_patch);
        Self { cond_dropped, t, eps }
    }
}

/// Previous-patch inputs under teacher forcing: the zero patch, then the ground truth shifted by one.
pub fn shifted_previous(patches: &[LatentPatch], d_patch: usize) -> Vec<LatentPatch> {
    std::iter::once(LatentPatch::zeros(d_patch))
        .chain(patches[..patches.len().saturating_sub(1)].iter().cloned())
        .collect()
}

/// Records the joint loss for one example under teacher forcing.
pub fn total_loss_with<F: Real>(
    g: &mut Graph<'_, F>,
    model: &Model,
    example: &TrainingExample,
    draws: &LossDraws,
) -> Result<(Var, LossComponents)> {
    let c = &model.config;
    let n = example.patches.len();
    if n == 0 || example.stop_labels.len() != n {
        return Err(Error::InvalidInput("example patches and stop labels disagree".into()));
    }
    if draws.t.len() != n || draws.eps.len() != n * c.d_patch {
        return Err(Error::InvalidInput("loss draws do not match the example".into()));
    }
    let history = if n > 1 {
        Some(g.constant(stack_patches(&example.patches[..n - 1], c.d_patch)?))
    } else {
        None
    };
    let h = model.hierarchy(g, &example.text_tokens, history)?;

    let z0 = stack_patches::<F>(&example.patches, c.d_patch)?;
    let z_prev = g.constant(stack_patches(&shifted_previous(&example.patches, c.d_patch), c.d_patch)?);
    let eps = Tensor::from_f64(vec![n, c.d_patch], &draws.eps)?;
    let cond = (!draws.cond_dropped).then_some(h.h_final);
    let fm = model.locdit.fm_loss(g, &z0, z_prev, cond, &draws.t, &eps)?;

    let stop = g.bce_with_logits(h.stop_logits, &bool_targets(&example.stop_labels))?;
    let weighted = g.scale(stop, F::from_f64_lossy(c.lambda_stop));
    let total = g.add(fm, weighted)?;

    let comps = LossComponents {
        total: g.value(total).item()?.as_f64(),
        fm: g.value(fm).item()?.as_f64(),
        stop: g.value(stop).item()?.as_f64(),
        cond_dropped: draws.cond_dropped,
    };
    Ok((total, comps))
}

/// [`total_loss_with`] with draws taken from `rng`.
pub fn total_loss<F: Real, R: Rng + ?Sized>(
    g: &mut Graph<'_, F>,
    model: &Model,
    example: &TrainingExample,
    rng: &mut R,
) -> Result<(Var, LossComponents)> {
    let c = &model.config;
    let draws = LossDraws::sample(rng, example.patches.len(), c.d_patch, c.cfg_drop_prob);
    total_loss_with(g, model, example, &draws)
}
