use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::DecodeError;
use crate::text::{detokenize, tokenize, words};

/// Upper bound on constraint words; one bit each in a [`Signature`].
pub const MAX_CONSTRAINTS: usize = 64;

/// Ordered, de-duplicated lowercase words that a generation should contain.
/// Position `i` owns bit `i` of every [`Signature`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    words: Vec<String>,
}

impl ConstraintSet {
    /// Lowercases, drops empty entries and later duplicates.
    pub fn new<I, S>(words: I) -> Result<Self, DecodeError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for w in words {
            let w = w.as_ref().trim().to_lowercase();
            if w.is_empty() || !seen.insert(w.clone()) {
                continue;
            }
            out.push(w);
        }
        if out.len() > MAX_CONSTRAINTS {
            return Err(DecodeError::TooManyConstraints(out.len()));
        }
        Ok(Self { words: out })
    }

    /// One constraint per word of a (possibly multi-word) facet.
    pub fn from_facet(facet: &str) -> Result<Self, DecodeError> {
        Self::new(words(facet))
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Signature with every constraint satisfied.
    pub fn full(&self) -> Signature {
        if self.words.len() == 64 {
            Signature(u64::MAX)
        } else {
            Signature((1u64 << self.words.len()) - 1)
        }
    }
}

/// Bitmask of satisfied constraint positions.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Signature(pub u64);

impl Signature {
    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains(self, other: Signature) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: Signature) -> Signature {
        Signature(self.0 | other.0)
    }

    pub fn is_set(self, bit: usize) -> bool {
        bit < 64 && self.0 & (1 << bit) != 0
    }
}

/// Bit `i` is set iff `constraints.words()[i]` occurs as a whole word in the
/// detokenized, lowercased `tokens`.
pub fn satisfaction<S: AsRef<str>>(tokens: &[S], constraints: &ConstraintSet) -> Signature {
    let text = detokenize(tokens);
    let present: HashSet<String> = tokenize(&text).into_iter().collect();
    let mut mask = 0u64;
    for (i, w) in constraints.words.iter().enumerate() {
        if present.contains(w) {
            mask |= 1 << i;
        }
    }
    Signature(mask)
}
