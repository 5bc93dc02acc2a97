//! Latin-to-Thai transliteration table.

use std::collections::HashMap;
use std::path::Path;

use unicode_script::{Script, UnicodeScript};

use crate::{tsv_rows, EvalError, Result};

pub(crate) fn is_latin(c: char) -> bool {
    c.script() == Script::Latin
}

/// Case-insensitive map from Latin-script tokens to Thai spellings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, String>,
}

fn key_of(token: &str) -> String {
    token.to_lowercase()
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry. The key must be a nonempty run of Latin-script
    /// characters and the spelling must contain none.
    pub fn insert(&mut self, latin: &str, thai: &str) -> std::result::Result<(), String> {
        if latin.is_empty() || !latin.chars().all(is_latin) {
            return Err(format!("key {latin:?} is not a Latin-script token"));
        }
        if thai.trim().is_empty() {
            return Err(format!("key {latin:?} has an empty spelling"));
        }
        if thai.chars().any(is_latin) {
            return Err(format!("spelling {thai:?} contains Latin-script characters"));
        }
        let key = key_of(latin);
        if self.entries.contains_key(&key) {
            return Err(format!("duplicate key {latin:?}"));
        }
        self.entries.insert(key, thai.to_string());
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(&key_of(token)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `latin<TAB>thai` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Self::new();
        for (row, fields) in tsv_rows(text) {
            let [latin, thai] = fields[..] else {
                return Err(EvalError::row(
                    row,
                    format!("expected 2 tab-separated fields, found {}", fields.len()),
                ));
            };
            lex.insert(latin.trim(), thai.trim()).map_err(|e| EvalError::row(row, e))?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| EvalError::file(path, e))?;
        Self::parse(std::str::from_utf8(&bytes)?)
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for Lexicon {
    /// Panics on an invalid entry; meant for literal tables.
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str)>>(iter: I) -> Self {
        let mut lex = Self::new();
        for (latin, thai) in iter {
            lex.insert(latin, thai).expect("valid lexicon entry");
        }
        lex
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let lex = Lexicon::parse("# header\nAI\tเอไอ\n\nemail\tอีเมล\r\n").unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.get("ai"), Some("เอไอ"));
        assert_eq!(lex.get("EMAIL"), Some("อีเมล"));
        assert_eq!(lex.get("mail"), None);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let cases = [
            "ok\tโอเค\nbroken\n",
            "ok\tโอเค\nx1\tเอ็กซ์\n",
            "ok\tโอเค\nOK\tโอเค\n",
            "ok\tโอเค\nab\tเอb\n",
            "ok\tโอเค\nab\t \n",
        ];
        for text in cases {
            let err = Lexicon::parse(text).unwrap_err();
            assert_eq!(err.row_number(), Some(2), "{text:?}: {err}");
        }
    }
}
