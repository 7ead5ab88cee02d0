//! Canonical tokenization and n-gram extraction.
//!
//! Every metric and the toy LM vocabulary go through [`normalize`], so scores
//! are internally consistent. They are not bit-compatible with any external
//! scorer (sacrebleu, pycocoevalcap, ...), which tokenize differently.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An ordered list of non-empty, whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid token at index {index}: {token:?}")]
pub struct InvalidToken {
    pub index: usize,
    pub token: String,
}

impl TokenSeq {
    /// Builds a sequence, rejecting empty tokens and tokens with whitespace.
    pub fn new<I, S>(tokens: I) -> Result<Self, InvalidToken>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for (index, token) in tokens.iter().enumerate() {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(InvalidToken {
                    index,
                    token: token.clone(),
                });
            }
        }
        Ok(TokenSeq(tokens))
    }

    /// Convenience for tests and fixtures: splits on whitespace without any
    /// further normalization.
    pub fn from_words(text: &str) -> Self {
        TokenSeq(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Re-joins with single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = InvalidToken;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        TokenSeq::new(tokens)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(seq: TokenSeq) -> Self {
        seq.0
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Lowercases, splits punctuation into single-character tokens, keeps numerals
/// (including `3.5` and `1,000`) intact, and collapses whitespace.
pub fn normalize(text: &str) -> TokenSeq {
    let chars: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut tokens = Vec::new();
    let mut word = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            word.push(c);
        } else if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if is_numeral_separator(&chars, i, &word) {
            word.push(c);
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut word, &mut tokens);
    TokenSeq(tokens)
}

fn flush(word: &mut String, tokens: &mut Vec<String>) {
    if !word.is_empty() {
        tokens.push(std::mem::take(word));
    }
}

// `.` or `,` between two digits, inside a purely numeric word.
fn is_numeral_separator(chars: &[char], i: usize, word: &str) -> bool {
    matches!(chars[i], '.' | ',')
        && !word.is_empty()
        && word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
        && word.ends_with(|c: char| c.is_ascii_digit())
        && chars.get(i + 1).is_some_and(char::is_ascii_digit)
}

/// Multiset of n-grams of a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramBag {
    n: usize,
    counts: BTreeMap<Vec<String>, usize>,
}

impl NGramBag {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total number of n-gram occurrences.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Number of distinct n-grams.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Iterates in lexicographic n-gram order.
    pub fn iter(&self) -> impl Iterator<Item = (&[String], usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Sum over shared n-grams of `min(self, other)`.
    pub fn clipped_overlap(&self, other: &NGramBag) -> usize {
        self.iter().map(|(g, c)| c.min(other.get(g))).sum()
    }
}

/// All contiguous n-grams of `seq` with multiplicity.
///
/// # Panics
/// If `n == 0`.
pub fn ngrams(seq: &TokenSeq, n: usize) -> NGramBag {
    assert!(n >= 1, "n-gram order must be positive");
    let mut counts = BTreeMap::new();
    for window in seq.tokens().windows(n) {
        *counts.entry(window.to_vec()).or_insert(0) += 1;
    }
    NGramBag { n, counts }
}
