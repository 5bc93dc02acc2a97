//! Speaker similarity: cosine scores between embedding files.

use std::path::{Path, PathBuf};

use crate::cer::skip_header;
use crate::{scores_csv, tsv_rows, EvalError, Result};

const MAGIC: &[u8; 4] = b"JEMB";

/// `dot(a, b) / (‖a‖·‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(EvalError::ZeroNorm);
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f32>,
}

impl Embedding {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.values.len() as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(EvalError::EmbeddingMagic {
                path: path.to_path_buf(),
                found: bytes[..bytes.len().min(4)].to_vec(),
            });
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let expected = 8 + 4 * dim;
        if bytes.len() != expected {
            return Err(EvalError::EmbeddingLength {
                path: path.to_path_buf(),
                dim,
                expected,
                found: bytes.len(),
            });
        }
        let values = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { values })
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

pub fn read_embedding(path: &Path) -> Result<Embedding> {
    let bytes = std::fs::read(path).map_err(|e| EvalError::file(path, e))?;
    Embedding::decode(&bytes, path)
}

pub fn write_embedding(path: &Path, values: &[f32]) -> Result<()> {
    let bytes = Embedding {
        values: values.to_vec(),
    }
    .encode();
    std::fs::write(path, bytes).map_err(|e| EvalError::file(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPair {
    pub id: String,
    pub reference: PathBuf,
    pub hypothesis: PathBuf,
    pub sim: f64,
}

/// Scores `id<TAB>reference.jemb<TAB>hypothesis.jemb` rows (optional header
/// line). Relative paths resolve against the directory of `base`.
pub fn read_sim_pairs(text: &str, base: &Path) -> Result<Vec<SimPair>> {
    let dir = base.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (row, fields) in skip_header(tsv_rows(text), &["id", "reference", "hypothesis"]) {
        let [id, r, h] = fields[..] else {
            return Err(EvalError::row(
                row,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let reference = dir.join(r.trim());
        let hypothesis = dir.join(h.trim());
        let a = read_embedding(&reference)?;
        let b = read_embedding(&hypothesis)?;
        let sim = cosine_sim(&a.as_f64(), &b.as_f64()).map_err(|e| EvalError::row(row, e.to_string()))?;
        out.push(SimPair {
            id: id.trim().to_string(),
            reference,
            hypothesis,
            sim,
        });
    }
    Ok(out)
}

/// `id,sim` rows followed by `mean,<value>`.
pub fn sim_csv(pairs: &[SimPair]) -> Result<String> {
    let rows: Vec<_> = pairs.iter().map(|p| (p.id.clone(), p.sim)).collect();
    scores_csv(["id", "sim"], &rows)
}
