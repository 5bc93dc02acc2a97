//! `key=value` run configuration and seed resolution.

use std::path::Path;

use jaitts_core::model::ModelConfig;
use jaitts_core::pipeline::TrainConfig;

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "JAITTS_SEED";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Whether `seed` was given in the file.
    pub seed_in_file: bool,
}

impl RunConfig {
    /// Parses flat `key=value` lines. `#` starts a comment; keys are the
    /// model and training fields, each at most once.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| CliError::malformed(source_name, i + 1, reason);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(bad(format!("key {key:?} given twice")));
            }
            seen.push(key);
            config.set(key, value).map_err(|e| match e {
                SetError::Unknown => bad(format!("unknown key {key:?}")),
                SetError::Value(reason) => bad(reason),
            })?;
            if key == "seed" {
                config.seed_in_file = true;
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), SetError> {
        let known = self.model.set(key, value).map_err(|e| SetError::Value(e.to_string()))?
            || self.train.set(key, value).map_err(|e| SetError::Value(e.to_string()))?;
        if known {
            Ok(())
        } else {
            Err(SetError::Unknown)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

#[derive(Debug)]
pub enum SetError {
    Unknown,
    Value(String),
}

/// `--seed`, then the config file, then [`SEED_ENV`], then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::malformed(SEED_ENV, 1, format!("{v:?} is not an unsigned integer"))),
        None => Ok(0),
    }
}

pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// Comma-separated token ids.
pub fn parse_tokens(text: &str) -> Result<Vec<usize>> {
    if text.trim().is_empty() {
        return Err(CliError::EmptyTokens);
    }
    text.split(',')
        .enumerate()
        .map(|(i, t)| {
            t.trim().parse().map_err(|_| {
                CliError::malformed("--tokens", 1, format!("item {} ({:?}) is not a token id", i + 1, t.trim()))
            })
        })
        .collect()
}
