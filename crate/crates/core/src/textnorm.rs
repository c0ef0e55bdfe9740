//! Transcript normalization ahead of WER scoring.
//!
//! Pipeline order: lowercase, expand numerals to words, replace punctuation
//! with spaces, split on whitespace, drop filler tokens.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize};

pub const DEFAULT_FILLERS: [&str; 7] = ["um", "uh", "hmm", "mhm", "erm", "ah", "er"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    #[serde(deserialize_with = "lowercase_set")]
    pub filler_words: BTreeSet<String>,
    pub expand_numbers: bool,
    pub strip_punctuation: bool,
}

fn lowercase_set<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<String>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    Ok(raw.into_iter().map(|w| w.to_lowercase()).collect())
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            filler_words: DEFAULT_FILLERS.iter().map(|s| s.to_string()).collect(),
            expand_numbers: true,
            strip_punctuation: true,
        }
    }
}

impl NormalizationConfig {
    pub fn with_fillers<I, S>(fillers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            filler_words: fillers.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
            ..Self::default()
        }
    }
}

pub fn normalize(text: &str, config: &NormalizationConfig) -> Vec<String> {
    let mut s = text.to_lowercase();
    if config.expand_numbers {
        s = expand_numbers(&s);
    }
    if config.strip_punctuation {
        s = strip_punctuation(&s);
    }
    s.split_whitespace()
        .filter(|t| !config.filler_words.contains(*t))
        .map(str::to_owned)
        .collect()
}

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn below_thousand(n: u64, out: &mut Vec<&'static str>) {
    debug_assert!(n < 1000);
    let hundreds = n / 100;
    let rest = n % 100;
    if hundreds > 0 {
        out.push(ONES[hundreds as usize]);
        out.push("hundred");
    }
    if rest >= 20 {
        out.push(TENS[(rest / 10) as usize]);
        if rest % 10 != 0 {
            out.push(ONES[(rest % 10) as usize]);
        }
    } else if rest > 0 || hundreds == 0 {
        out.push(ONES[rest as usize]);
    }
}

/// English cardinal for `n < 10^9`, space separated, no hyphens or "and".
/// Returns `None` for larger values.
pub fn number_to_words(n: u64) -> Option<String> {
    if n >= 1_000_000_000 {
        return None;
    }
    let mut words = Vec::new();
    let millions = n / 1_000_000;
    let thousands = (n / 1000) % 1000;
    let rest = n % 1000;
    if millions > 0 {
        below_thousand(millions, &mut words);
        words.push("million");
    }
    if thousands > 0 {
        below_thousand(thousands, &mut words);
        words.push("thousand");
    }
    if rest > 0 || words.is_empty() {
        below_thousand(rest, &mut words);
    }
    Some(words.join(" "))
}

fn digits_to_words(digits: &str) -> String {
    digits
        .bytes()
        .map(|b| ONES[(b - b'0') as usize])
        .collect::<Vec<_>>()
        .join(" ")
}

fn integer_to_words(digits: &str) -> String {
    if digits.len() > 1 && digits.starts_with('0') {
        return digits_to_words(digits);
    }
    digits
        .parse::<u64>()
        .ok()
        .and_then(number_to_words)
        .unwrap_or_else(|| digits_to_words(digits))
}

/// Replace standalone numerals with words. Numerals glued to letters
/// ("25th", "mp3") are left alone. Accepts `1,234` grouping and reads the
/// fractional part of decimals digit by digit after "point".
pub fn expand_numbers(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let starts_number =
            c.is_ascii_digit() && (i == 0 || !chars[i - 1].is_alphanumeric());
        if !starts_number {
            out.push(c);
            i += 1;
            continue;
        }

        let mut j = i;
        while j < chars.len() && chars[j].is_ascii_digit() {
            j += 1;
        }
        let mut integer: String = chars[i..j].iter().collect();
        // thousands groups: exactly three digits after each comma
        if integer.len() <= 3 {
            loop {
                let group_end = j + 4;
                if group_end <= chars.len()
                    && chars[j] == ','
                    && chars[j + 1..group_end].iter().all(|c| c.is_ascii_digit())
                    && chars
                        .get(group_end)
                        .map_or(true, |c| !c.is_ascii_digit() && !c.is_alphabetic())
                {
                    integer.extend(&chars[j + 1..group_end]);
                    j = group_end;
                } else {
                    break;
                }
            }
        }
        let mut fraction = String::new();
        if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
            let mut k = j + 1;
            while k < chars.len() && chars[k].is_ascii_digit() {
                k += 1;
            }
            if !chars.get(k).is_some_and(|c| c.is_alphabetic()) {
                fraction = chars[j + 1..k].iter().collect();
                j = k;
            }
        }

        if chars.get(j).is_some_and(|c| c.is_alphabetic()) {
            // ordinal or alphanumeric token
            out.extend(&chars[i..j]);
            i = j;
            continue;
        }

        out.push(' ');
        out.push_str(&integer_to_words(&integer));
        if !fraction.is_empty() {
            out.push_str(" point ");
            out.push_str(&digits_to_words(&fraction));
        }
        out.push(' ');
        i = j;
    }
    out
}

/// Replace every non-alphanumeric, non-space character with a space,
/// keeping apostrophes between two alphanumerics ("don't").
pub fn strip_punctuation(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    chars
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else if (c == '\'' || c == '\u{2019}')
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
            {
                '\''
            } else {
                ' '
            }
        })
        .collect()
}
