use crate::{Error, Result};

/// Architecture and conditioning hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers_tslm: usize,
    pub n_layers_ralm: usize,
    /// Bidirectional layers in the local diffusion transformer.
    pub n_layers_locdit: usize,
    pub n_heads: usize,
    pub d_patch: usize,
    pub vocab_size: usize,
    /// Longest accepted text prompt (size of the text position table).
    pub max_text_len: usize,
    /// Quantization step of the scalar quantizer.
    pub fsq_delta: f64,
    /// Lattice bound: levels are `k · fsq_delta` for `k` in `-fsq_l..=fsq_l`.
    pub fsq_l: u32,
    /// Hard cap on the patch history, reference patches included.
    pub max_patches: usize,
    pub lambda_stop: f64,
    pub cfg_drop_prob: f64,
    /// Audio duration one patch stands for.
    pub frame_ms: u32,
    /// Std of the normal initializer for weight matrices and embeddings.
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_layers_tslm: 2,
            n_layers_ralm: 2,
            n_layers_locdit: 2,
            n_heads: 4,
            d_patch: 16,
            vocab_size: 64,
            max_text_len: 64,
            fsq_delta: 0.5,
            fsq_l: 4,
            max_patches: 256,
            lambda_stop: 0.1,
            cfg_drop_prob: 0.1,
            frame_ms: 40,
            init_std: 0.02,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("d_model", self.d_model),
            ("n_layers_tslm", self.n_layers_tslm),
            ("n_layers_ralm", self.n_layers_ralm),
            ("n_layers_locdit", self.n_layers_locdit),
            ("n_heads", self.n_heads),
            ("d_patch", self.d_patch),
            ("vocab_size", self.vocab_size),
            ("max_text_len", self.max_text_len),
            ("max_patches", self.max_patches),
        ];
        for (name, v) in extents {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.fsq_delta.is_finite() && self.fsq_delta > 0.0) {
            return Err(Error::Config("fsq_delta must be positive".into()));
        }
        if self.fsq_l == 0 {
            return Err(Error::Config("fsq_l must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cfg_drop_prob) {
            return Err(Error::Config("cfg_drop_prob must lie in [0, 1]".into()));
        }
        if !(self.lambda_stop.is_finite() && self.lambda_stop >= 0.0) {
            return Err(Error::Config("lambda_stop must be non-negative".into()));
        }
        if self.frame_ms == 0 {
            return Err(Error::Config("frame_ms must be positive".into()));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return Err(Error::Config("init_std must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Every field as a `(key, value)` pair, in declaration order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("d_model", self.d_model.to_string()),
            ("n_layers_tslm", self.n_layers_tslm.to_string()),
            ("n_layers_ralm", self.n_layers_ralm.to_string()),
            ("n_layers_locdit", self.n_layers_locdit.to_string()),
            ("n_heads", self.n_heads.to_string()),
            ("d_patch", self.d_patch.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("max_text_len", self.max_text_len.to_string()),
            ("fsq_delta", self.fsq_delta.to_string()),
            ("fsq_l", self.fsq_l.to_string()),
            ("max_patches", self.max_patches.to_string()),
            ("lambda_stop", self.lambda_stop.to_string()),
            ("cfg_drop_prob", self.cfg_drop_prob.to_string()),
            ("frame_ms", self.frame_ms.to_string()),
            ("init_std", self.init_std.to_string()),
        ]
    }

    /// Sets one field by key. Returns `Ok(false)` when the key is not a model field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "d_model" => self.d_model = parse_value(key, value)?,
            "n_layers_tslm" => self.n_layers_tslm = parse_value(key, value)?,
            "n_layers_ralm" => self.n_layers_ralm = parse_value(key, value)?,
            "n_layers_locdit" => self.n_layers_locdit = parse_value(key, value)?,
            "n_heads" => self.n_heads = parse_value(key, value)?,
            "d_patch" => self.d_patch = parse_value(key, value)?,
            "vocab_size" => self.vocab_size = parse_value(key, value)?,
            "max_text_len" => self.max_text_len = parse_value(key, value)?,
            "fsq_delta" => self.fsq_delta = parse_value(key, value)?,
            "fsq_l" | "fsq_L" => self.fsq_l = parse_value(key, value)?,
            "max_patches" => self.max_patches = parse_value(key, value)?,
            "lambda_stop" => self.lambda_stop = parse_value(key, value)?,
            "cfg_drop_prob" => self.cfg_drop_prob = parse_value(key, value)?,
            "frame_ms" => self.frame_ms = parse_value(key, value)?,
            "init_std" => self.init_std = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// `key=value` lines, one per field.
    pub fn to_kv_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Inverse of [`ModelConfig::to_kv_text`]; unknown keys are errors.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed line {line:?}")))?;
            if !c.set(k.trim(), v.trim())? {
                return Err(Error::Config(format!("unknown key {:?}", k.trim())));
            }
        }
        c.validate()?;
        Ok(c)
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}
