//! Binary checkpoint files.
//!
//! Layout, little-endian throughout: magic `JTV1`, format version `u32`,
//! tensor count `u32`, then per tensor a `u16` name length, the UTF-8 name, a
//! `u8` rank, `u64` dims and `f32` values. The model configuration travels as
//! an extra rank-1 tensor named [`CONFIG_TENSOR`] whose values are the bytes of
//! its `key=value` text.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::model::{ModelConfig, ModelState};
use crate::numerics::Tensor;

pub const MAGIC: [u8; 4] = *b"JTV1";
pub const FORMAT_VERSION: u32 = 1;
pub const CONFIG_TENSOR: &str = "__config__";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: magic bytes {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported checkpoint version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checkpoint truncated while reading {what}")]
    Truncated { what: &'static str },
    #[error("tensor {name}: stored shape {stored:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        stored: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("checkpoint lacks tensor {name}")]
    MissingTensor { name: String },
    #[error("checkpoint has unexpected tensor {name}")]
    UnexpectedTensor { name: String },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CheckpointError {
    /// Stable identifier for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadMagic { .. } => "bad-magic",
            Self::UnsupportedVersion { .. } => "bad-version",
            Self::Truncated { .. } => "truncated",
            Self::ShapeMismatch { .. } => "shape-mismatch",
            Self::MissingTensor { .. } => "missing-tensor",
            Self::UnexpectedTensor { .. } => "unexpected-tensor",
            Self::Malformed(_) => "malformed",
            Self::Io(_) => "io",
        }
    }
}

type CkResult<T> = Result<T, CheckpointError>;

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failure never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn push_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) -> CkResult<()> {
    let len = u16::try_from(name.len())
        .map_err(|_| CheckpointError::Malformed(format!("tensor name {name:?} is too long")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(t.rank() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

fn config_tensor(config: &ModelConfig) -> Tensor<f32> {
    let bytes: Vec<f32> = config.to_kv_text().bytes().map(f32::from).collect();
    Tensor::vector(bytes).expect("config text is non-empty")
}

pub fn encode_checkpoint(state: &ModelState<f32>) -> CkResult<Vec<u8>> {
    let count = u32::try_from(state.params.len() + 1)
        .map_err(|_| CheckpointError::Malformed("too many tensors".into()))?;
    let mut out = Vec::with_capacity(16 + 4 * state.params.num_scalars());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    push_tensor(&mut out, CONFIG_TENSOR, &config_tensor(state.config()))?;
    for (name, t) in state.params.iter() {
        push_tensor(&mut out, name, t)?;
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> CkResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated { what })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> CkResult<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

/// Parses a checkpoint into its named tensors, in file order.
pub fn decode_tensors(bytes: &[u8]) -> CkResult<Vec<(String, Tensor<f32>)>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.array::<4>("magic")?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(r.array("version")?);
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion { found: version });
    }
    let count = u32::from_le_bytes(r.array("tensor count")?);
    let mut tensors = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.array("name length")?) as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.array::<1>("rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = u64::from_le_bytes(r.array("dims")?);
            shape.push(usize::try_from(d).map_err(|_| CheckpointError::Malformed(format!("{name}: extent {d}")))?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n.checked_mul(4).is_some())
            .ok_or_else(|| CheckpointError::Malformed(format!("{name}: shape {shape:?} overflows")))?;
        let raw = r.take(numel * 4, "tensor values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let t = Tensor::new(shape, values).map_err(|e| CheckpointError::Malformed(format!("{name}: {e}")))?;
        tensors.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(tensors)
}

/// Configuration snapshot stored alongside the tensors.
pub fn snapshot_config(tensors: &[(String, Tensor<f32>)]) -> CkResult<ModelConfig> {
    let (_, t) = tensors
        .iter()
        .find(|(n, _)| n == CONFIG_TENSOR)
        .ok_or_else(|| CheckpointError::MissingTensor {
            name: CONFIG_TENSOR.into(),
        })?;
    let bytes = t
        .data()
        .iter()
        .map(|&v| {
            if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                Ok(v as u8)
            } else {
                Err(CheckpointError::Malformed("config snapshot is not byte text".into()))
            }
        })
        .collect::<CkResult<Vec<u8>>>()?;
    let text = String::from_utf8(bytes).map_err(|_| CheckpointError::Malformed("config snapshot is not UTF-8".into()))?;
    ModelConfig::from_kv_text(&text).map_err(|e| CheckpointError::Malformed(format!("config snapshot: {e}")))
}

/// Fills a freshly built state with stored tensors. Every parameter must be
/// present with the shape the state expects, and nothing else may be stored.
pub fn restore(state: &mut ModelState<f32>, tensors: Vec<(String, Tensor<f32>)>) -> CkResult<()> {
    let mut seen = vec![false; state.params.len()];
    for (name, t) in tensors {
        if name == CONFIG_TENSOR {
            continue;
        }
        let id = state
            .params
            .id(&name)
            .ok_or_else(|| CheckpointError::UnexpectedTensor { name: name.clone() })?;
        let expected = state.params.get(id).shape().to_vec();
        if t.shape() != expected.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                stored: t.shape().to_vec(),
                expected,
            });
        }
        state.params.set(id, t).expect("shape checked");
        seen[id.index()] = true;
    }
    if let Some(id) = state.params.ids().find(|id| !seen[id.index()]) {
        return Err(CheckpointError::MissingTensor {
            name: state.params.name(id).to_string(),
        });
    }
    Ok(())
}

pub fn save_checkpoint(state: &ModelState<f32>, path: &Path) -> CkResult<()> {
    write_atomic(path, &encode_checkpoint(state)?)?;
    Ok(())
}

/// Loads a checkpoint using its own configuration snapshot.
pub fn load_checkpoint(path: &Path) -> CkResult<ModelState<f32>> {
    let tensors = decode_tensors(&std::fs::read(path)?)?;
    let config = snapshot_config(&tensors)?;
    load_tensors_into(&config, tensors)
}

/// Loads a checkpoint into the architecture described by `config`.
pub fn load_checkpoint_as(path: &Path, config: &ModelConfig) -> CkResult<ModelState<f32>> {
    let tensors = decode_tensors(&std::fs::read(path)?)?;
    load_tensors_into(config, tensors)
}

fn load_tensors_into(config: &ModelConfig, tensors: Vec<(String, Tensor<f32>)>) -> CkResult<ModelState<f32>> {
    let mut state =
        ModelState::init(config, 0).map_err(|e| CheckpointError::Malformed(format!("configuration: {e}")))?;
    restore(&mut state, tensors)?;
    Ok(state)
}
