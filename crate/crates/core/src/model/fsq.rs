//! Finite scalar quantization onto a symmetric bounded lattice.
//!
//! `q(h)_j = Δ · clip(round(h_j / Δ), −L, L)` with round-half-away-from-zero.
//! The backward pass is the identity (straight-through estimator).

use crate::numerics::{Graph, Real, Tensor, TensorError, Var};
use crate::{Error, Result};

/// Quantization lattice `{k·Δ : |k| ≤ L}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsqLattice {
    delta: f64,
    bound: u32,
}

impl FsqLattice {
    pub fn new(delta: f64, bound: u32) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Config(format!("quantization step {delta} must be positive")));
        }
        if bound == 0 {
            return Err(Error::Config("lattice bound must be at least 1".into()));
        }
        Ok(Self { delta, bound })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bound(&self) -> u32 {
        self.bound
    }

    /// Lattice index of `x`, before scaling by Δ.
    pub fn level<F: Real>(&self, x: F) -> F {
        let delta = F::from_f64_lossy(self.delta);
        let l = F::from_u32(self.bound).expect("bound fits");
        // Float::round rounds half away from zero
        (x / delta).round().max(-l).min(l)
    }

    pub fn quantize_scalar<F: Real>(&self, x: F) -> F {
        F::from_f64_lossy(self.delta) * self.level(x)
    }

    /// Quantizes every coordinate; rejects non-finite input.
    pub fn quantize<F: Real>(&self, h: &[F]) -> Result<Vec<F>> {
        if h.iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite { op: "fsq_quantize" }.into());
        }
        Ok(h.iter().map(|&x| self.quantize_scalar(x)).collect())
    }

    /// True when `x` equals `k·Δ` for an integer `|k| ≤ L`, exactly as this lattice computes it.
    pub fn contains<F: Real>(&self, x: F) -> bool {
        let k = self.level(x);
        F::from_f64_lossy(self.delta) * k == x
    }

    /// Records the quantizer on a graph with straight-through gradients.
    pub fn forward<F: Real>(&self, g: &mut Graph<'_, F>, h: Var) -> Result<Var> {
        let src = g.value(h);
        let q = self.quantize(src.data())?;
        let q = Tensor::new(src.shape().to_vec(), q)?;
        Ok(g.straight_through(h, q)?)
    }
}

/// Free-function form of the quantizer.
pub fn fsq_quantize<F: Real>(h: &[F], delta: f64, bound: u32) -> Result<Vec<F>> {
    FsqLattice::new(delta, bound)?.quantize(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(fsq_quantize(&[0.2f64], 1.0, 2).unwrap(), vec![0.0]);
        assert_eq!(fsq_quantize(&[3.7f64], 1.0, 2).unwrap(), vec![2.0]);
        assert_eq!(fsq_quantize(&[-2.6f64], 1.0, 2).unwrap(), vec![-2.0]);
    }

    #[test]
    fn halves_round_away_from_zero() {
        let q = fsq_quantize(&[0.5f64, -0.5, 1.5, -1.5, 0.25], 1.0, 4).unwrap();
        assert_eq!(q, vec![1.0, -1.0, 2.0, -2.0, 0.0]);
        let q = fsq_quantize(&[0.25f32, -0.25], 0.5, 4).unwrap();
        assert_eq!(q, vec![0.5, -0.5]);
    }

    #[test]
    fn rejects_non_finite_and_bad_lattices() {
        assert!(fsq_quantize(&[f64::NAN], 1.0, 2).is_err());
        assert!(fsq_quantize(&[f64::INFINITY], 1.0, 2).is_err());
        assert!(fsq_quantize(&[1.0f64], 0.0, 2).is_err());
        assert!(fsq_quantize(&[1.0f64], 1.0, 0).is_err());
    }

    #[test]
    fn lattice_has_two_l_plus_one_levels() {
        let lat = FsqLattice::new(0.5, 4).unwrap();
        let mut levels: Vec<f64> = (-100..=100)
            .map(|i| lat.quantize_scalar(i as f64 * 0.037))
            .collect();
        levels.dedup();
        assert_eq!(levels.len(), 9);
        assert_eq!(levels.first(), Some(&-2.0));
        assert_eq!(levels.last(), Some(&2.0));
    }
}
