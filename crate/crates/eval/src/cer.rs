//! Character error rate over normalized text.

use crate::normalize::{normalize, NormalizationConfig, NormalizedText};
use crate::{scores_csv, tsv_rows, EvalError, Result};

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut stack = [0usize; 64];
    let mut heap = Vec::new();
    let row: &mut [usize] = if b.len() < stack.len() {
        &mut stack[..=b.len()]
    } else {
        heap.resize(b.len() + 1, 0);
        &mut heap
    };
    for (j, cell) in row.iter_mut().enumerate() {
        *cell = j;
    }
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(diag + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

/// Edit distance divided by reference length, in Unicode scalar values.
pub fn cer(reference: &NormalizedText, hypothesis: &NormalizedText) -> Result<f64> {
    let r = reference.chars();
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    Ok(levenshtein(&r, &hypothesis.chars()) as f64 / r.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub reference: NormalizedText,
    pub hypothesis: NormalizedText,
    pub cer: f64,
}

impl EvalPair {
    pub fn new(reference: NormalizedText, hypothesis: NormalizedText) -> Result<Self> {
        let cer = cer(&reference, &hypothesis)?;
        Ok(Self {
            reference,
            hypothesis,
            cer,
        })
    }

    /// Normalizes both sides with the same configuration, then scores.
    pub fn from_raw(reference: &str, hypothesis: &str, config: &NormalizationConfig) -> Result<Self> {
        Self::new(normalize(reference, config), normalize(hypothesis, config))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CerRow {
    pub id: String,
    pub pair: EvalPair,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CerBatch {
    pub rows: Vec<CerRow>,
}

fn is_header(fields: &[&str], names: &[&str]) -> bool {
    fields.len() == names.len()
        && fields
            .iter()
            .zip(names)
            .all(|(f, n)| f.trim().eq_ignore_ascii_case(n))
}

pub(crate) fn skip_header<'a, I>(rows: I, names: &'static [&'static str]) -> impl Iterator<Item = (usize, Vec<&'a str>)>
where
    I: Iterator<Item = (usize, Vec<&'a str>)>,
{
    rows.enumerate()
        .filter(move |(i, (_, fields))| !(*i == 0 && is_header(fields, names)))
        .map(|(_, row)| row)
}

/// Parses `id<TAB>reference<TAB>hypothesis` rows (optional header line) and
/// scores each one.
pub fn read_cer_batch(text: &str, config: &NormalizationConfig) -> Result<CerBatch> {
    let mut rows = Vec::new();
    for (row, fields) in skip_header(tsv_rows(text), &["id", "reference", "hypothesis"]) {
        let [id, reference, hypothesis] = fields[..] else {
            return Err(EvalError::row(
                row,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let pair = EvalPair::from_raw(reference, hypothesis, config).map_err(|e| match e {
            EvalError::EmptyReference => EvalError::row(row, "reference is empty after normalization"),
            other => other,
        })?;
        rows.push(CerRow {
            id: id.trim().to_string(),
            pair,
        });
    }
    Ok(CerBatch { rows })
}

impl CerBatch {
    pub fn mean(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.pair.cer).sum::<f64>() / self.rows.len() as f64
    }

    /// `id,cer` rows followed by `mean,<value>`.
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<_> = self.rows.iter().map(|r| (r.id.clone(), r.pair.cer)).collect();
        scores_csv(["id", "cer"], &rows)
    }
}
