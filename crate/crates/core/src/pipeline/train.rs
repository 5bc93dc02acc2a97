use rayon::prelude::*;

use super::loss::{total_loss, LossComponents};
use super::synthetic::{SyntheticSpec, TrainingExample};
use crate::model::{parse_value, ModelState};
use crate::numerics::{Graph, ParamGrads, ParamStore, Streams, Tensor, TensorError};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub train_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            train_steps: 3000,
            batch_size: 8,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("train_steps", self.train_steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
        ]
    }

    /// Sets one field by key. Returns `Ok(false)` when the key is not a training field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "train_steps" | "steps" => self.train_steps = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse_value(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse_value(key, value)?,
            "adam_eps" => self.adam_eps = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Batch-mean losses of one optimizer step, measured before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub total: f64,
    pub fm: f64,
    pub stop: f64,
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    t: i32,
    m: Vec<Tensor<f32>>,
    v: Vec<Tensor<f32>>,
}

impl Adam {
    pub fn new(config: &TrainConfig, params: &ParamStore<f32>) -> Self {
        let zeros: Vec<Tensor<f32>> = params
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape().to_vec()))
            .collect();
        Self {
            lr: config.learning_rate as f32,
            beta1: config.adam_beta1 as f32,
            beta2: config.adam_beta2 as f32,
            eps: config.adam_eps as f32,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore<f32>, grads: &ParamGrads<f32>) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (id, g) in grads.iter() {
            let Some(g) = g else { continue };
            let i = id.index();
            let p = params.get_mut(id).data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v.iter_mut()).zip(g.data()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Loss and gradients for one example, drawing noise from its own stream.
pub fn example_gradients(
    state: &ModelState<f32>,
    example: &TrainingExample,
    streams: &Streams,
    stream_index: u64,
) -> Result<(LossComponents, ParamGrads<f32>)> {
    let mut rng = streams.indexed("train.noise", stream_index);
    let mut g = Graph::new(&state.params);
    let (loss, comps) = total_loss(&mut g, &state.model, example, &mut rng)?;
    let grads = g.backward(loss)?;
    Ok((comps, grads))
}

/// Batch of synthetic examples for a training step.
pub fn training_batch(spec: &SyntheticSpec, streams: &Streams, step: usize, batch_size: usize) -> Result<Vec<TrainingExample>> {
    let mut rng = streams.indexed("train.data", step as u64);
    (0..batch_size).map(|_| spec.sample_example(&mut rng)).collect()
}

/// Mean loss and gradient over a batch. Examples run in parallel; results are
/// reduced in batch order, so the outcome does not depend on thread scheduling.
pub fn batch_gradients(
    state: &ModelState<f32>,
    batch: &[TrainingExample],
    streams: &Streams,
    step: usize,
) -> Result<(LossRecord, ParamGrads<f32>)> {
    let per_example: Vec<Result<(LossComponents, ParamGrads<f32>)>> = batch
        .par_iter()
        .enumerate()
        .map(|(b, ex)| example_gradients(state, ex, streams, ((step as u64) << 20) | b as u64))
        .collect();
    let mut grads = ParamGrads::empty(state.params.len());
    let (mut total, mut fm, mut stop) = (0.0, 0.0, 0.0);
    for r in per_example {
        let (c, g) = r?;
        total += c.total;
        fm += c.fm;
        stop += c.stop;
        grads.accumulate(&g);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n as f32);
    Ok((
        LossRecord {
            step,
            total: total / n,
            fm: fm / n,
            stop: stop / n,
        },
        grads,
    ))
}

/// Joint end-to-end training on oracle batches. Deterministic given `config.seed`.
pub fn train(
    config: &TrainConfig,
    spec: &SyntheticSpec,
    mut state: ModelState<f32>,
    mut on_step: impl FnMut(&LossRecord),
) -> Result<(ModelState<f32>, Vec<LossRecord>)> {
    config.validate()?;
    spec.check_fits(state.config())?;
    let streams = Streams::new(config.seed);
    let mut adam = Adam::new(config, &state.params);
    let mut history = Vec::with_capacity(config.train_steps);
    for step in 0..config.train_steps {
        let batch = training_batch(spec, &streams, step, config.batch_size)?;
        let (record, grads) = match batch_gradients(&state, &batch, &streams, step) {
            Err(Error::Tensor(TensorError::NonFinite { .. })) => return Err(Error::NonFiniteLoss { step }),
            other => other?,
        };
        if !record.total.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        adam.step(&mut state.params, &grads);
        on_step(&record);
        history.push(record);
    }
    Ok((state, history))
}

/// Mean of `total` over a window of the history.
pub fn mean_total(history: &[LossRecord]) -> f64 {
    history.iter().map(|r| r.total).sum::<f64>() / history.len().max(1) as f64
}
