use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ToyLmError;
use crate::textnorm::{normalize, TokenSeq};

pub const PAD: usize = 0;
pub const STOP: usize = 1;
pub const IMAGE: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<stop>", "<image>", "<unk>"];

/// Ordered token list; ids 0..4 are the reserved PAD, STOP, IMAGE and UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = ToyLmError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, ToyLmError> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(ToyLmError::Argument(format!(
                "vocabulary must start with the reserved tokens {RESERVED:?}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(ToyLmError::Argument(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(ToyLmError::Argument(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// Keeps the `max_size - 4` most frequent normalized tokens of `texts`,
    /// ties broken alphabetically.
    pub fn build<'a, I>(texts: I, max_size: usize) -> Result<Self, ToyLmError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if max_size < RESERVED.len() {
            return Err(ToyLmError::Argument(format!(
                "vocabulary size {max_size} leaves no room for the {} reserved tokens",
                RESERVED.len()
            )));
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in normalize(text).tokens() {
                *counts.entry(tok.clone()).or_default() += 1;
            }
        }
        for r in RESERVED {
            counts.remove(r);
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().take(max_size - RESERVED.len()).map(|(t, _)| t))
            .collect();
        Vocab::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Maps tokens to ids, with unknown tokens becoming UNK. Also returns the
    /// number of unknown tokens.
    pub fn encode(&self, seq: &TokenSeq) -> (Vec<usize>, usize) {
        let mut oov = 0;
        let ids = seq
            .iter()
            .map(|t| {
                self.id(t).unwrap_or_else(|| {
                    oov += 1;
                    UNK
                })
            })
            .collect();
        (ids, oov)
    }

    pub fn encode_text(&self, text: &str) -> (Vec<usize>, usize) {
        self.encode(&normalize(text))
    }

    /// Joins tokens with spaces up to the first STOP, skipping PAD and IMAGE.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&id| id != STOP)
            .filter(|&&id| id != PAD && id != IMAGE)
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK]))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
