//! Latent trajectory files: magic `JLAT`, then `d_patch`, `n_patches` and
//! `frame_ms` as `u32`, then row-major `f32` values, all little-endian.

use std::path::Path;

use thiserror::Error;

use super::checkpoint::write_atomic;
use crate::model::LatentPatch;

pub const MAGIC: [u8; 4] = *b"JLAT";
const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum LatentsError {
    #[error("not a latent trajectory: magic bytes {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("latent trajectory truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed latent trajectory: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LatentsError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadMagic { .. } => "bad-magic",
            Self::Truncated { .. } => "truncated",
            Self::Malformed(_) => "malformed",
            Self::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub d_patch: usize,
    pub frame_ms: u32,
    pub patches: Vec<LatentPatch>,
}

impl LatentTrajectory {
    pub fn new(d_patch: usize, frame_ms: u32, patches: Vec<LatentPatch>) -> Result<Self, LatentsError> {
        if d_patch == 0 {
            return Err(LatentsError::Malformed("d_patch must be positive".into()));
        }
        if let Some(p) = patches.iter().find(|p| p.len() != d_patch) {
            return Err(LatentsError::Malformed(format!(
                "patch of length {} in a trajectory of width {d_patch}",
                p.len()
            )));
        }
        Ok(Self {
            d_patch,
            frame_ms,
            patches,
        })
    }

    /// Audio duration in seconds.
    pub fn seconds(&self) -> f64 {
        self.patches.len() as f64 * self.frame_ms as f64 / 1000.0
    }

    pub fn encode(&self) -> Result<Vec<u8>, LatentsError> {
        let to_u32 = |x: usize, what: &str| {
            u32::try_from(x).map_err(|_| LatentsError::Malformed(format!("{what} {x} exceeds u32")))
        };
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.d_patch * self.patches.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&to_u32(self.d_patch, "d_patch")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.patches.len(), "patch count")?.to_le_bytes());
        out.extend_from_slice(&self.frame_ms.to_le_bytes());
        for p in &self.patches {
            for &v in p.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, LatentsError> {
        if bytes.len() < 4 {
            return Err(LatentsError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("length checked");
        if magic != MAGIC {
            return Err(LatentsError::BadMagic { found: magic });
        }
        if bytes.len() < HEADER_LEN {
            return Err(LatentsError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("in header"));
        let d_patch = word(4) as usize;
        let n = word(8) as usize;
        let frame_ms = word(12);
        if d_patch == 0 {
            return Err(LatentsError::Malformed("d_patch is zero".into()));
        }
        let expected = d_patch
            .checked_mul(n)
            .and_then(|x| x.checked_mul(4))
            .and_then(|x| x.checked_add(HEADER_LEN))
            .ok_or_else(|| LatentsError::Malformed("size overflows".into()))?;
        if bytes.len() < expected {
            return Err(LatentsError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(LatentsError::Malformed(format!(
                "{} trailing bytes",
                bytes.len() - expected
            )));
        }
        let values: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let patches = values
            .chunks_exact(d_patch)
            .map(|row| LatentPatch::new(row.to_vec()).map_err(|e| LatentsError::Malformed(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(d_patch, frame_ms, patches)
    }
}

pub fn write_latents(path: &Path, trajectory: &LatentTrajectory) -> Result<(), LatentsError> {
    write_atomic(path, &trajectory.encode()?)?;
    Ok(())
}

pub fn read_latents(path: &Path) -> Result<LatentTrajectory, LatentsError> {
    LatentTrajectory::decode(&std::fs::read(path)?)
}
