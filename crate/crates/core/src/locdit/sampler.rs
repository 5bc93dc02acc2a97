use rand::Rng;

use crate::numerics::{standard_normal, Real, TensorError};
use crate::{Error, Result};

/// Anything that predicts `d z / d t` for one patch.
pub trait VelocityField<F> {
    fn velocity(
        &self,
        z_t: &[F],
        t: f64,
        h_final: &[F],
        z_prev: &[F],
        cond_enabled: bool,
    ) -> Result<Vec<F>>;
}

/// Classifier-free guidance: `v_uncond + s·(v_cond − v_uncond)`.
///
/// Returns `v_cond` unchanged at `s = 1`.
pub fn cfg_combine<F: Real>(v_cond: &[F], v_uncond: &[F], scale: f64) -> Result<Vec<F>> {
    if v_cond.len() != v_uncond.len() {
        return Err(TensorError::ShapeMismatch {
            op: "cfg_combine",
            lhs: vec![v_cond.len()],
            rhs: vec![v_uncond.len()],
        }
        .into());
    }
    if scale == 1.0 {
        return Ok(v_cond.to_vec());
    }
    let s = F::from_f64_lossy(scale);
    Ok(v_cond
        .iter()
        .zip(v_uncond)
        .map(|(&c, &u)| u + s * (c - u))
        .collect())
}

/// Euler integration of the guided field from `t = 1` (noise) to `t = 0`,
/// starting at `z_init`, with `steps` uniform steps.
pub fn sample_patch_from<F: Real, V: VelocityField<F> + ?Sized>(
    field: &V,
    z_init: Vec<F>,
    h_final: &[F],
    z_prev: &[F],
    steps: usize,
    cfg_scale: f64,
) -> Result<Vec<F>> {
    if steps == 0 {
        return Err(Error::InvalidInput("sampler needs at least one step".into()));
    }
    let dt = F::from_f64_lossy(1.0 / steps as f64);
    let mut z = z_init;
    for s in 0..steps {
        let t = 1.0 - s as f64 / steps as f64;
        let v_cond = field.velocity(&z, t, h_final, z_prev, true)?;
        let v = if cfg_scale == 1.0 {
            v_cond
        } else {
            let v_uncond = field.velocity(&z, t, h_final, z_prev, false)?;
            cfg_combine(&v_cond, &v_uncond, cfg_scale)?
        };
        if v.len() != z.len() {
            return Err(TensorError::ShapeMismatch {
                op: "sample_patch",
                lhs: vec![z.len()],
                rhs: vec![v.len()],
            }
            .into());
        }
        for (zi, vi) in z.iter_mut().zip(&v) {
            *zi -= dt * *vi;
        }
    }
    Ok(z)
}

/// Draws the initial noise from `rng`, then integrates as [`sample_patch_from`].
pub fn sample_patch<F: Real, V: VelocityField<F> + ?Sized, R: Rng + ?Sized>(
    field: &V,
    h_final: &[F],
    z_prev: &[F],
    steps: usize,
    cfg_scale: f64,
    rng: &mut R,
) -> Result<Vec<F>> {
    if steps == 0 {
        return Err(Error::InvalidInput("sampler needs at least one step".into()));
    }
    let z_init = standard_normal(rng, z_prev.len())
        .into_iter()
        .map(F::from_f64_lossy)
        .collect();
    sample_patch_from(field, z_init, h_final, z_prev, steps, cfg_scale)
}
