//! Objective evaluation: Thai text normalization for character error rate,
//! cosine scoring of speaker embeddings and pairwise vote tallies.

pub mod cer;
mod error;
pub mod lexicon;
pub mod mai_yamok;
pub mod normalize;
pub mod numerals;
pub mod sim;
pub mod tally;

pub use cer::{cer, levenshtein, read_cer_batch, CerBatch, CerRow, EvalPair};
pub use error::{EvalError, Result};
pub use lexicon::Lexicon;
pub use mai_yamok::{expand_mai_yamok, MAI_YAMOK};
pub use normalize::{normalize, normalize_bytes, NormalizationConfig, NormalizedText};
pub use numerals::{numerals_to_thai, MAX_NUMERAL_DIGITS};
pub use sim::{cosine_sim, read_embedding, read_sim_pairs, sim_csv, write_embedding, Embedding, SimPair};
pub use tally::{aggregate_tally, parse_votes, tally_rows, votes_csv, Outcome, PairwiseVote, Record, TallyReport};

/// Renders a two-column CSV of labelled values followed by a `mean` row.
pub fn scores_csv(header: [&str; 2], rows: &[(String, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    let mut sum = 0.0;
    for (id, value) in rows {
        w.write_record([id.as_str(), &value.to_string()])?;
        sum += value;
    }
    let mean = if rows.is_empty() { 0.0 } else { sum / rows.len() as f64 };
    w.write_record(["mean", &mean.to_string()])?;
    let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Rows of a tab-separated file with `#` comments and blank lines skipped.
/// Yields 1-based line numbers alongside the fields.
pub(crate) fn tsv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.strip_suffix('\r').unwrap_or(line)))
        .filter(|(_, line)| !line.trim().is_empty() && !line.trim_start().starts_with('#'))
        .map(|(n, line)| (n, line.split('\t').collect()))
}
