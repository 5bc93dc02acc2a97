//! Text normalization applied to both sides of a CER comparison.

use std::fmt;

use unicode_general_category::{get_general_category, GeneralCategory as Gc};
use unicode_normalization::UnicodeNormalization;

use crate::lexicon::is_latin;
use crate::numerals::{numerals_to_thai, spell_digits, MAX_NUMERAL_DIGITS};
use crate::{expand_mai_yamok, Lexicon, Result};

/// Upper bound on whole-pipeline passes. Stripping can join Latin letters
/// into a new lexicon token or bring a combining mark next to its base, so
/// the stages repeat until the text stops changing.
const MAX_PASSES: usize = 32;

#[derive(Debug, Clone)]
pub struct NormalizationConfig {
    pub lexicon: Lexicon,
    pub transliterate: bool,
    pub numerals: bool,
    pub mai_yamok: bool,
    pub strip: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self::with_lexicon(Lexicon::new())
    }
}

impl NormalizationConfig {
    /// All stages enabled.
    pub fn with_lexicon(lexicon: Lexicon) -> Self {
        Self {
            lexicon,
            transliterate: true,
            numerals: true,
            mai_yamok: true,
            strip: true,
        }
    }
}

/// Output of [`normalize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedText(String);

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Unicode scalar values, the CER character unit.
    pub fn chars(&self) -> Vec<char> {
        self.0.chars().collect()
    }

    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// NFC, lexicon transliteration of Latin tokens, digit runs to Thai number
/// words, mai yamok expansion, then removal of whitespace and punctuation.
pub fn normalize(raw: &str, config: &NormalizationConfig) -> NormalizedText {
    let mut text = one_pass(raw, config);
    for _ in 1..MAX_PASSES {
        let next = one_pass(&text, config);
        if next == text {
            return NormalizedText(text);
        }
        text = next;
    }
    log::warn!("normalization did not settle after {MAX_PASSES} passes");
    NormalizedText(text)
}

pub fn normalize_bytes(raw: &[u8], config: &NormalizationConfig) -> Result<NormalizedText> {
    Ok(normalize(std::str::from_utf8(raw)?, config))
}

fn one_pass(text: &str, config: &NormalizationConfig) -> String {
    let mut text: String = text.nfc().collect();
    if config.transliterate {
        text = transliterate(&text, &config.lexicon);
    }
    if config.numerals {
        text = read_numerals(&text);
    }
    if config.mai_yamok {
        text = expand_mai_yamok(&text);
    }
    if config.strip {
        text.retain(|c| !is_stripped(c));
    }
    text
}

/// Replaces `run`s of characters matching `class` using `map`.
fn map_runs(text: &str, class: impl Fn(char) -> bool, mut map: impl FnMut(&str, &mut String)) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run_start = None;
    for (i, c) in text.char_indices() {
        match (class(c), run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                map(&text[s..i], &mut out);
                run_start = None;
                out.push(c);
            }
            (false, None) => out.push(c),
            (true, Some(_)) => {}
        }
    }
    if let Some(s) = run_start {
        map(&text[s..], &mut out);
    }
    out
}

fn transliterate(text: &str, lexicon: &Lexicon) -> String {
    map_runs(text, is_latin, |token, out| match lexicon.get(token) {
        Some(thai) => out.push_str(thai),
        None => {
            log::warn!("no transliteration for {token:?}");
            out.push_str(token);
        }
    })
}

fn read_numerals(text: &str) -> String {
    map_runs(
        text,
        |c| c.is_ascii_digit(),
        |digits, out| {
            if digits.len() > MAX_NUMERAL_DIGITS {
                out.push_str(&spell_digits(digits));
            } else {
                out.push_str(&numerals_to_thai(digits).expect("ASCII digit run"));
            }
        },
    )
}

pub(crate) fn is_stripped(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            get_general_category(c),
            Gc::ConnectorPunctuation
                | Gc::DashPunctuation
                | Gc::OpenPunctuation
                | Gc::ClosePunctuation
                | Gc::InitialPunctuation
                | Gc::FinalPunctuation
                | Gc::OtherPunctuation
                | Gc::SpaceSeparator
                | Gc::LineSeparator
                | Gc::ParagraphSeparator
        )
}
