use std::collections::HashMap;

use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_INDEX: usize = 0;

/// Lowercases, strips punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Ordered token list with corpus frequencies. Index 0 is the reserved
/// out-of-vocabulary token; the rest are sorted by descending frequency, then
/// alphabetically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequency: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(corpus: &[S], min_count: u64) -> Result<Self> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for text in corpus {
            for tok in tokenize(text.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, u64)> = Vec::new();
        let mut dropped = 0;
        for (tok, n) in counts {
            if n >= min_count.max(1) {
                kept.push((tok, n));
            } else {
                dropped += n;
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![UNK_TOKEN.to_string()];
        let mut frequency = vec![dropped];
        for (tok, n) in kept {
            tokens.push(tok);
            frequency.push(n);
        }
        Ok(Self::from_parts(tokens, frequency))
    }

    pub(crate) fn from_parts(tokens: Vec<String>, frequency: Vec<u64>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens,
            frequency,
            index,
        }
    }

    /// Rebuilds a vocabulary from a stored token list (frequencies unknown).
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let n = tokens.len();
        Self::from_parts(tokens, vec![0; n])
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

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn frequency(&self, i: usize) -> u64 {
        self.frequency[i]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequency
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Token indices of `text`; unknown tokens map to [`UNK_INDEX`].
    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .iter()
            .map(|t| self.index_of(t).unwrap_or(UNK_INDEX))
            .collect()
    }
}
