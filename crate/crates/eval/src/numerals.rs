//! Thai cardinal readings of decimal digit strings.

use crate::{EvalError, Result};

/// Longest digit string [`numerals_to_thai`] accepts (ten-trillion scale).
pub const MAX_NUMERAL_DIGITS: usize = 13;

pub(crate) const DIGITS: [&str; 10] = [
    "ศูนย์", "หนึ่ง", "สอง", "สาม", "สี่", "ห้า", "หก", "เจ็ด", "แปด", "เก้า",
];
const MILLION: &str = "ล้าน";
// แสน หมื่น พัน ร้อย, highest place first
const PLACES: [(u64, &str); 4] = [(100_000, "แสน"), (10_000, "หมื่น"), (1_000, "พัน"), (100, "ร้อย")];

/// Reads an ASCII digit string as a Thai number. Leading zeros are ignored.
pub fn numerals_to_thai(digits: &str) -> Result<String> {
    let err = |reason| EvalError::Numeral {
        digits: digits.to_string(),
        reason,
    };
    if digits.is_empty() {
        return Err(err("empty digit string"));
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err("contains a non-digit character"));
    }
    if digits.len() > MAX_NUMERAL_DIGITS {
        return Err(err("more than 13 digits"));
    }
    let n: u64 = digits.parse().expect("at most 13 ASCII digits");
    Ok(number_words(n))
}

pub(crate) fn number_words(n: u64) -> String {
    if n == 0 {
        return DIGITS[0].to_string();
    }
    let mut out = String::new();
    read(n, false, &mut out);
    out
}

/// Appends the reading of `n > 0`. `higher` says a nonzero place above `n`
/// has already been read, which turns a final 1 into เอ็ด.
fn read(n: u64, higher: bool, out: &mut String) {
    if n >= 1_000_000 {
        read(n / 1_000_000, higher, out);
        out.push_str(MILLION);
        let rest = n % 1_000_000;
        if rest > 0 {
            read(rest, true, out);
        }
        return;
    }
    let mut rest = n;
    let mut higher = higher;
    for (place, word) in PLACES {
        let d = rest / place;
        if d > 0 {
            out.push_str(DIGITS[d as usize]);
            out.push_str(word);
            higher = true;
        }
        rest %= place;
    }
    match rest / 10 {
        0 => {}
        1 => out.push_str("สิบ"),
        2 => out.push_str("ยี่สิบ"),
        d => {
            out.push_str(DIGITS[d as usize]);
            out.push_str("สิบ");
        }
    }
    if rest >= 10 {
        higher = true;
    }
    match rest % 10 {
        0 => {}
        1 if higher => out.push_str("เอ็ด"),
        d => out.push_str(DIGITS[d as usize]),
    }
}

/// Digit-by-digit reading, for runs too long to read as one number.
pub(crate) fn spell_digits(digits: &str) -> String {
    digits
        .bytes()
        .map(|b| DIGITS[(b - b'0') as usize])
        .collect()
}
