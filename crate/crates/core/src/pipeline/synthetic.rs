//! Deterministic sinusoidal latent oracle standing in for an audio autoencoder.
//!
//! Token `k` owns a frequency `f(k)` (cycles per patch) and is rendered as
//! `patches_per_token` consecutive patches. Sample `j` of local patch `n` is
//! `sin(2π·f(k)·(n + j/d_patch + φ))`, where the phase `φ` is a per-speaker
//! offset. Optional noise is seeded from `(tokens, speaker)`, so examples stay
//! deterministic.

use rand::Rng;

use crate::model::{LatentPatch, ModelConfig};
use crate::numerics::{standard_normal, Streams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Base frequency per token id, in cycles per patch.
    pub frequencies: Vec<f64>,
    /// Speaker phases are spread over `[0, speaker_offset_range)` patches.
    pub speaker_offset_range: f64,
    pub patches_per_token: usize,
    pub noise_amplitude: f64,
    pub d_patch: usize,
    /// Prompt lengths drawn by [`SyntheticSpec::sample_prompt`].
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub n_speakers: u64,
}

/// One teacher-forcing sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub text_tokens: Vec<usize>,
    pub patches: Vec<LatentPatch>,
    /// True only at the final patch.
    pub stop_labels: Vec<bool>,
}

impl TrainingExample {
    pub fn new(text_tokens: Vec<usize>, patches: Vec<LatentPatch>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::InvalidInput("training example has no patches".into()));
        }
        let n = patches.len();
        let stop_labels = (0..n).map(|i| i + 1 == n).collect();
        Ok(Self {
            text_tokens,
            patches,
            stop_labels,
        })
    }
}

fn unit_hash(x: u64) -> f64 {
    // splitmix64 finalizer
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

impl SyntheticSpec {
    /// Frequencies spread over `[0.1, 0.6)` cycles per patch in a scrambled token order.
    pub fn for_config(config: &ModelConfig) -> Self {
        let v = config.vocab_size;
        let frequencies = (0..v)
            .map(|k| 0.1 + 0.5 * ((k * 37) % v) as f64 / v as f64)
            .collect();
        Self {
            frequencies,
            speaker_offset_range: 0.25,
            patches_per_token: 3,
            noise_amplitude: 0.0,
            d_patch: config.d_patch,
            min_tokens: 2,
            max_tokens: 6,
            n_speakers: 16,
        }
    }

    pub fn phase(&self, speaker_id: u64) -> f64 {
        self.speaker_offset_range * unit_hash(speaker_id)
    }

    pub fn frequency(&self, token: usize) -> Result<f64> {
        self.frequencies
            .get(token)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no oracle frequency for token {token}")))
    }

    pub fn oracle_len(&self, n_tokens: usize) -> usize {
        self.patches_per_token * n_tokens
    }

    /// Checks that every prompt [`SyntheticSpec::sample_prompt`] can draw
    /// yields an example the model accepts.
    pub fn check_fits(&self, config: &ModelConfig) -> Result<()> {
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return Err(Error::Config(format!(
                "prompt lengths {}..={} are empty",
                self.min_tokens, self.max_tokens
            )));
        }
        if self.max_tokens > config.max_text_len {
            return Err(Error::Config(format!(
                "prompts of up to {} tokens exceed max_text_len {}",
                self.max_tokens, config.max_text_len
            )));
        }
        if self.frequencies.len() < config.vocab_size || self.d_patch != config.d_patch {
            return Err(Error::Config("synthetic oracle does not match the model shape".into()));
        }
        // teacher forcing feeds all but the final patch as history
        let longest = self.oracle_len(self.max_tokens);
        if longest > config.max_patches {
            return Err(Error::Config(format!(
                "oracle sequences of up to {longest} patches exceed max_patches {}",
                config.max_patches
            )));
        }
        Ok(())
    }

    pub fn example(&self, tokens: &[usize], speaker_id: u64) -> Result<TrainingExample> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("oracle needs at least one token".into()));
        }
        let phase = self.phase(speaker_id);
        let mut noise_rng = (self.noise_amplitude > 0.0).then(|| {
            let key = tokens
                .iter()
                .fold(speaker_id, |h, &t| unit_hash(h ^ t as u64).to_bits());
            Streams::new(key).stream("oracle.noise")
        });
        let mut patches = Vec::with_capacity(self.oracle_len(tokens.len()));
        for &tok in tokens {
            let f = self.frequency(tok)?;
            for n in 0..self.patches_per_token {
                let mut values: Vec<f64> = (0..self.d_patch)
                    .map(|j| {
                        let s = n as f64 + j as f64 / self.d_patch as f64 + phase;
                        (2.0 * std::f64::consts::PI * f * s).sin()
                    })
                    .collect();
                if let Some(rng) = noise_rng.as_mut() {
                    for (x, e) in values.iter_mut().zip(standard_normal(rng, self.d_patch)) {
                        *x += self.noise_amplitude * e;
                    }
                }
                patches.push(LatentPatch::new(values.into_iter().map(|x| x as f32).collect())?);
            }
        }
        TrainingExample::new(tokens.to_vec(), patches)
    }

    /// Random prompt within the configured length range, with a random speaker.
    pub fn sample_prompt<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, u64) {
        let len = rng.random_range(self.min_tokens..=self.max_tokens);
        let tokens = (0..len)
            .map(|_| rng.random_range(0..self.frequencies.len()))
            .collect();
        (tokens, rng.random_range(0..self.n_speakers))
    }

    pub fn sample_example<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrainingExample> {
        let (tokens, speaker) = self.sample_prompt(rng);
        self.example(&tokens, speaker)
    }
}
