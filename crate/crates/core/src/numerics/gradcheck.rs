//! Central finite-difference checks for recorded gradients (64-bit).

use super::params::{Graph, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::{Tensor, TensorError};

/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn scalar_output(tape: &Tape<f64>, out: Var) -> Result<f64, TensorError> {
    tape.value(out).item().map_err(|_| TensorError::NotScalar {
        op: "grad_check",
        shape: tape.shape(out).to_vec(),
    })
}

/// Maximum relative error between the recorded gradient of `f` at `x` and
/// central differences with the given `step`, over every coordinate of `x`.
pub fn grad_check<E, G>(f: G, x: &Tensor<f64>, step: f64) -> Result<f64, E>
where
    E: From<TensorError>,
    G: Fn(&mut Tape<f64>, Var) -> Result<Var, E>,
{
    let eval = |point: &Tensor<f64>| -> Result<f64, E> {
        let mut tape = Tape::new();
        let v = tape.leaf(point.clone());
        let out = f(&mut tape, v)?;
        Ok(scalar_output(&tape, out)?)
    };

    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let out = f(&mut tape, xv)?;
    scalar_output(&tape, out)?;
    let grads = tape.backward(out)?;
    let analytic = grads
        .get(xv)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape().to_vec()));

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - step;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// Like [`grad_check`], but perturbs the listed parameters of a store.
pub fn grad_check_params<E, G>(
    store: &ParamStore<f64>,
    ids: &[ParamId],
    f: G,
    step: f64,
) -> Result<f64, E>
where
    E: From<TensorError>,
    G: Fn(&mut Graph<'_, f64>) -> Result<Var, E>,
{
    let eval = |s: &ParamStore<f64>| -> Result<f64, E> {
        let mut g = Graph::new(s);
        let out = f(&mut g)?;
        Ok(scalar_output(&g, out)?)
    };
    let mut g = Graph::new(store);
    let out = f(&mut g)?;
    scalar_output(&g, out)?;
    let grads = g.backward(out)?;

    let mut probe = store.clone();
    let mut worst = 0.0f64;
    for &id in ids {
        let analytic = grads.dense(id, store);
        for i in 0..analytic.numel() {
            let orig = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + step;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig - step;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    Ok(worst)
}
