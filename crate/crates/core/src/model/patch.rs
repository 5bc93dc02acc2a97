use crate::numerics::{Real, Tensor, TensorError};
use crate::{Error, Result};

/// One autoregressive generation unit: a fixed-length latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPatch(Vec<f32>);

impl LatentPatch {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("latent patch is empty".into()));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("latent patch has non-finite values".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(d_patch: usize) -> Self {
        Self(vec![0.0; d_patch])
    }

    /// Lossy conversion from a wider element type; non-finite values are rejected.
    pub fn from_real<F: Real>(values: &[F]) -> Result<Self> {
        Self::new(values.iter().map(|x| x.as_f64() as f32).collect())
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_real<F: Real>(&self) -> Vec<F> {
        self.0.iter().map(|&x| F::from_f64_lossy(f64::from(x))).collect()
    }
}

/// Stack patches into a `[n, d_patch]` tensor, checking every length.
pub fn stack_patches<F: Real>(patches: &[LatentPatch], d_patch: usize) -> Result<Tensor<F>> {
    if patches.is_empty() {
        return Err(Error::InvalidInput("no patches to stack".into()));
    }
    let mut data = Vec::with_capacity(patches.len() * d_patch);
    for p in patches {
        if p.len() != d_patch {
            return Err(TensorError::ShapeMismatch {
                op: "latent_patch",
                lhs: vec![d_patch],
                rhs: vec![p.len()],
            }
            .into());
        }
        data.extend(p.to_real::<F>());
    }
    Ok(Tensor::new(vec![patches.len(), d_patch], data)?)
}

/// Stack equal-length rows into a `[n, d]` tensor.
pub fn stack_rows<F: Real>(rows: &[Vec<F>], d: usize, what: &str) -> Result<Tensor<F>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{what}: no rows")));
    }
    let mut data = Vec::with_capacity(rows.len() * d);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::InvalidInput(format!(
                "{what}: row {i} has length {}, expected {d}",
                r.len()
            )));
        }
        data.extend_from_slice(r);
    }
    Ok(Tensor::new(vec![rows.len(), d], data)?)
}

pub fn unstack_rows<F: Real>(t: &Tensor<F>) -> Vec<Vec<F>> {
    let d = *t.shape().last().expect("rank >= 1");
    t.data().chunks_exact(d).map(<[F]>::to_vec).collect()
}
