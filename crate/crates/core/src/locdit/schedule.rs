use crate::numerics::{Real, TensorError};
use crate::{Error, Result};

/// Linear (rectified) path: `α(t) = 1 − t`, `σ(t) = t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinearSchedule;

impl LinearSchedule {
    pub fn alpha(t: f64) -> f64 {
        1.0 - t
    }

    pub fn sigma(t: f64) -> f64 {
        t
    }
}

fn same_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(TensorError::ShapeMismatch {
            op,
            lhs: vec![a],
            rhs: vec![b],
        }
        .into())
    }
}

/// `z_t = α(t)·z0 + σ(t)·ε`. Exact at both endpoints.
pub fn noise<F: Real>(z0: &[F], t: f64, eps: &[F]) -> Result<Vec<F>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("diffusion time {t} is outside [0, 1]")));
    }
    same_len("noise", z0.len(), eps.len())?;
    let a = F::from_f64_lossy(LinearSchedule::alpha(t));
    let s = F::from_f64_lossy(LinearSchedule::sigma(t));
    Ok(z0.iter().zip(eps).map(|(&x, &e)| a * x + s * e).collect())
}

/// `d/dt z_t = ε − z0`, independent of `t` on the linear path.
pub fn target_velocity<F: Real>(z0: &[F], eps: &[F]) -> Result<Vec<F>> {
    same_len("target_velocity", z0.len(), eps.len())?;
    Ok(z0.iter().zip(eps).map(|(&x, &e)| e - x).collect())
}

/// A point on the noising path together with its endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSample<F> {
    pub z0: Vec<F>,
    pub t: f64,
    pub eps: Vec<F>,
    pub z_t: Vec<F>,
}

impl<F: Real> DiffusionSample<F> {
    pub fn new(z0: Vec<F>, t: f64, eps: Vec<F>) -> Result<Self> {
        let z_t = noise(&z0, t, &eps)?;
        Ok(Self { z0, t, eps, z_t })
    }

    pub fn target(&self) -> Vec<F> {
        target_velocity(&self.z0, &self.eps).expect("lengths checked at construction")
    }
}
