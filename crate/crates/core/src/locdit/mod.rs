//! Local diffusion transformer: decodes one latent patch by conditional flow
//! matching on the linear path `z_t = (1 − t)·z0 + t·ε`, conditioned on the
//! step's `h_final` and the previous patch.

mod sampler;
mod schedule;

pub use sampler::{cfg_combine, sample_patch, sample_patch_from, VelocityField};
pub use schedule::{noise, target_velocity, DiffusionSample, LinearSchedule};

use crate::model::layers::{Builder, Linear, Transformer};
use crate::model::{stack_rows, LatentPatch, ModelConfig, ModelState};
use crate::numerics::{Graph, ParamId, Real, Tensor, Var};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LocDit {
    pub patch_proj: Linear,
    /// `[2, d]`: marks the previous-patch and the noisy-patch token.
    pub segment: ParamId,
    pub time_fc1: Linear,
    pub time_fc2: Linear,
    pub cond_proj: Linear,
    /// Learned stand-in for `h_final` on the unconditional branch.
    pub null_cond: ParamId,
    pub transformer: Transformer,
    pub out_proj: Linear,
    d_model: usize,
}

/// Sinusoidal embedding of diffusion times, `[n, d]`.
pub fn timestep_embedding<F: Real>(t: &[f64], d: usize) -> Tensor<F> {
    let half = d / 2;
    let mut out = vec![0.0f64; t.len() * d];
    for (row, &ti) in t.iter().enumerate() {
        for k in 0..half {
            let freq = (-(10_000f64.ln()) * k as f64 / half as f64).exp();
            let arg = 1000.0 * ti * freq;
            out[row * d + k] = arg.sin();
            out[row * d + half + k] = arg.cos();
        }
    }
    Tensor::from_f64(vec![t.len(), d], &out).expect("positive extents")
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("diffusion time {t} is outside [0, 1]")))
    }
}

impl LocDit {
    pub fn new<F: Real>(b: &mut Builder<'_, F>, c: &ModelConfig) -> Self {
        let d = c.d_model;
        Self {
            patch_proj: Linear::new(b, "locdit.patch_proj", c.d_patch, d),
            segment: b.normal("locdit.segment", &[2, d]),
            time_fc1: Linear::new(b, "locdit.time_fc1", d, d),
            time_fc2: Linear::new(b, "locdit.time_fc2", d, d),
            cond_proj: Linear::new(b, "locdit.cond_proj", d, d),
            null_cond: b.normal("locdit.null_cond", &[d]),
            transformer: Transformer::new(b, "locdit", d, c.n_heads, c.n_layers_locdit),
            out_proj: Linear::new(b, "locdit.out_proj", d, c.d_patch),
            d_model: d,
        }
    }

    /// Velocity for a batch of `n` independent patches.
    ///
    /// Each patch is decoded from the two-token sequence `[z_prev, z_t]` with
    /// full (unmasked) attention; the time and conditioning embeddings are
    /// added to both tokens. `h_final = None` selects the null embedding.
    pub fn velocity<F: Real>(
        &self,
        g: &mut Graph<'_, F>,
        z_t: Var,
        t: &[f64],
        h_final: Option<Var>,
        z_prev: Var,
    ) -> Result<Var> {
        let n = g.shape(z_t)[0];
        if g.shape(z_prev) != g.shape(z_t) || t.len() != n {
            return Err(Error::InvalidInput(format!(
                "locdit: z_t {:?}, z_prev {:?} and {} times disagree",
                g.shape(z_t),
                g.shape(z_prev),
                t.len()
            )));
        }
        for &ti in t {
            check_time(ti)?;
        }
        let d = self.d_model;
        let cond = match h_final {
            Some(h) => {
                if g.shape(h) != [n, d] {
                    return Err(Error::InvalidInput(format!(
                        "locdit: h_final has shape {:?}, expected [{n}, {d}]",
                        g.shape(h)
                    )));
                }
                h
            }
            None => {
                let zeros = g.constant(Tensor::zeros([n, d]));
                let null = g.param(self.null_cond);
                g.add(zeros, null)?
            }
        };
        let temb = g.constant(timestep_embedding(t, d));
        let temb = self.time_fc1.forward(g, temb)?;
        let temb = g.gelu(temb);
        let temb = self.time_fc2.forward(g, temb)?;
        let c = self.cond_proj.forward(g, cond)?;
        let c = g.add(c, temb)?;

        let seg = g.param(self.segment);
        let seg_prev = g.slice(seg, 0, 0, 1)?;
        let seg_cur = g.slice(seg, 0, 1, 1)?;
        let seg_prev = g.reshape(seg_prev, &[d])?;
        let seg_cur = g.reshape(seg_cur, &[d])?;

        let prev = self.patch_proj.forward(g, z_prev)?;
        let prev = g.add(prev, seg_prev)?;
        let prev = g.add(prev, c)?;
        let cur = self.patch_proj.forward(g, z_t)?;
        let cur = g.add(cur, seg_cur)?;
        let cur = g.add(cur, c)?;
        let prev = g.reshape(prev, &[n, 1, d])?;
        let cur = g.reshape(cur, &[n, 1, d])?;
        let x = g.concat(&[prev, cur], 1)?;

        let h = self.transformer.forward(g, x, None)?;
        let h = g.slice(h, 1, 1, 1)?;
        let h = g.reshape(h, &[n, d])?;
        self.out_proj.forward(g, h)
    }

    /// Flow-matching loss: mean squared error between the predicted velocity at
    /// `z_t = noise(z0, t, ε)` and the target `ε − z0`, over all `[n, d_patch]` entries.
    #[allow(clippy::too_many_arguments)]
    pub fn fm_loss<F: Real>(
        &self,
        g: &mut Graph<'_, F>,
        z0: &Tensor<F>,
        z_prev: Var,
        h_final: Option<Var>,
        t: &[f64],
        eps: &Tensor<F>,
    ) -> Result<Var> {
        if z0.shape() != eps.shape() || z0.rank() != 2 || t.len() != z0.shape()[0] {
            return Err(Error::InvalidInput(format!(
                "fm_loss: z0 {:?}, eps {:?} and {} times disagree",
                z0.shape(),
                eps.shape(),
                t.len()
            )));
        }
        let dp = z0.shape()[1];
        let mut zt = Vec::with_capacity(z0.numel());
        let mut target = Vec::with_capacity(z0.numel());
        for (i, &ti) in t.iter().enumerate() {
            let r0 = &z0.data()[i * dp..(i + 1) * dp];
            let re = &eps.data()[i * dp..(i + 1) * dp];
            zt.extend(noise(r0, ti, re)?);
            target.extend(target_velocity(r0, re)?);
        }
        let zt = g.constant(Tensor::new(z0.shape().to_vec(), zt)?);
        let target = g.constant(Tensor::new(z0.shape().to_vec(), target)?);
        let v = self.velocity(g, zt, t, h_final, z_prev)?;
        Ok(g.mse(v, target)?)
    }
}

/// Flow-matching loss of any velocity field on one sample: mean over the
/// patch coordinates of `(v(z_t, t) − (ε − z0))²`.
pub fn flow_matching_loss<F: Real, V: VelocityField<F> + ?Sized>(
    field: &V,
    sample: &DiffusionSample<F>,
    z_prev: &[F],
    h_final: &[F],
    cond_enabled: bool,
) -> Result<F> {
    let v = field.velocity(&sample.z_t, sample.t, h_final, z_prev, cond_enabled)?;
    let target = sample.target();
    if v.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "velocity has length {}, expected {}",
            v.len(),
            target.len()
        )));
    }
    let total: F = v.iter().zip(&target).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(total / F::from_usize(v.len()).expect("length fits"))
}

impl<F: Real> ModelState<F> {
    /// Single-patch flow-matching loss.
    pub fn fm_loss(
        &self,
        z0: &LatentPatch,
        z_prev: &LatentPatch,
        h_final: &[F],
        t: f64,
        eps: &LatentPatch,
        cond_enabled: bool,
    ) -> Result<F> {
        let dp = self.config().d_patch;
        let mut g = Graph::frozen(&self.params);
        let z0 = stack_rows(&[z0.to_real::<F>()], dp, "z0")?;
        let eps = stack_rows(&[eps.to_real::<F>()], dp, "eps")?;
        let zp = g.constant(stack_rows(&[z_prev.to_real::<F>()], dp, "z_prev")?);
        let h = if cond_enabled {
            Some(g.constant(stack_rows(&[h_final.to_vec()], self.config().d_model, "h_final")?))
        } else {
            None
        };
        let loss = self.model.locdit.fm_loss(&mut g, &z0, zp, h, &[t], &eps)?;
        Ok(g.value(loss).item()?)
    }
}

impl<F: Real> VelocityField<F> for ModelState<F> {
    fn velocity(
        &self,
        z_t: &[F],
        t: f64,
        h_final: &[F],
        z_prev: &[F],
        cond_enabled: bool,
    ) -> Result<Vec<F>> {
        let c = self.config();
        let mut g = Graph::frozen(&self.params);
        let zt = g.constant(stack_rows(&[z_t.to_vec()], c.d_patch, "z_t")?);
        let zp = g.constant(stack_rows(&[z_prev.to_vec()], c.d_patch, "z_prev")?);
        let h = if cond_enabled {
            Some(g.constant(stack_rows(&[h_final.to_vec()], c.d_model, "h_final")?))
        } else {
            None
        };
        let v = self.model.locdit.velocity(&mut g, zt, &[t], h, zp)?;
        Ok(g.value(v).data().to_vec())
    }
}
