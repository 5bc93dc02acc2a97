//! Expansion of the Thai repetition marker.

pub const MAI_YAMOK: char = '\u{0E46}';

/// Replaces each ๆ, and any whitespace before it, with a copy of the
/// whitespace-delimited token that precedes it. Runs left to right over the
/// output, so a repeated marker repeats the already expanded token.
///
/// A marker with no token before it is kept as is, and also ends the token
/// that a later marker would repeat.
pub fn expand_mai_yamok(text: &str) -> String {
    if !text.contains(MAI_YAMOK) {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len() * 2);
    // end of the last marker kept verbatim
    let mut barrier = 0;
    for c in text.chars() {
        if c != MAI_YAMOK {
            out.push(c);
            continue;
        }
        let trimmed = out.trim_end().len().max(barrier);
        let start = out[barrier..trimmed]
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map_or(barrier, |(i, c)| barrier + i + c.len_utf8());
        if start == trimmed {
            log::warn!("repetition marker with no preceding token kept verbatim");
            out.push(c);
            barrier = out.len();
            continue;
        }
        let token = out[start..trimmed].to_string();
        out.truncate(trimmed);
        out.push_str(&token);
    }
    out
}
