//! Small hand-built models for tests, examples and benchmarks.

use std::collections::HashMap;

use super::{LanguageModel, LmError, TokenDist, TokenId, Vocab, EOS};

/// Deterministic chain: after `words[i]` always `words[i + 1]`, after the
/// last word EOS, after anything else `words[0]`.
#[derive(Debug, Clone)]
pub struct ChainLm {
    vocab: Vocab,
    chain: Vec<TokenId>,
}

impl ChainLm {
    /// # Panics
    /// If `words` repeats a word.
    pub fn new(words: &[&str]) -> Self {
        let vocab = Vocab::new(words.iter().copied()).expect("chain words must be distinct");
        let chain = words
            .iter()
            .map(|w| vocab.id(w).expect("just added"))
            .collect();
        Self { vocab, chain }
    }

    /// The forced continuation, EOS included.
    pub fn chain_ids(&self) -> Vec<TokenId> {
        let mut v = self.chain.clone();
        v.push(EOS);
        v
    }
}

impl LanguageModel for ChainLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        let next = match context
            .last()
            .and_then(|t| self.chain.iter().position(|c| c == t))
        {
            Some(i) if i + 1 < self.chain.len() => self.chain[i + 1],
            Some(_) => EOS,
            None => self.chain[0],
        };
        let mut probs = vec![0.0; self.vocab.len()];
        probs[next.index()] = 1.0;
        Ok(TokenDist { probs })
    }
}

/// Distributions looked up by the last context token, with a fallback row.
#[derive(Debug, Clone)]
pub struct TableLm {
    vocab: Vocab,
    rows: HashMap<TokenId, TokenDist>,
    fallback: TokenDist,
}

impl TableLm {
    /// Same distribution everywhere: the listed words plus `eos` mass.
    ///
    /// # Panics
    /// If the masses do not sum to 1.
    pub fn unigram(words: &[(&str, f64)], eos: f64) -> Self {
        let vocab = Vocab::new(words.iter().map(|(w, _)| *w)).expect("distinct words");
        let fallback = Self::row(&vocab, words, eos);
        Self {
            vocab,
            rows: HashMap::new(),
            fallback,
        }
    }

    /// Overrides the distribution used after `last`.
    ///
    /// # Panics
    /// If `last` or a listed word is not in the vocabulary, or the masses do
    /// not sum to 1.
    pub fn with_row(mut self, last: &str, words: &[(&str, f64)], eos: f64) -> Self {
        let id = self.vocab.id(last).expect("row key in vocabulary");
        let row = Self::row(&self.vocab, words, eos);
        self.rows.insert(id, row);
        self
    }

    fn row(vocab: &Vocab, words: &[(&str, f64)], eos: f64) -> TokenDist {
        let mut probs = vec![0.0; vocab.len()];
        probs[EOS.index()] = eos;
        for (w, p) in words {
            probs[vocab.id(w).expect("word in vocabulary").index()] = *p;
        }
        TokenDist::new(probs).expect("row must be a distribution")
    }
}

impl LanguageModel for TableLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        let row = context.last().and_then(|t| self.rows.get(t));
        Ok(row.unwrap_or(&self.fallback).clone())
    }
}

/// Pseudo-random, fully context-dependent model over `w0..w{n-1}` and EOS.
/// Every generable token gets probability at least roughly `0.05 / n`.
#[derive(Debug, Clone)]
pub struct HashLm {
    vocab: Vocab,
    seed: u64,
}

impl HashLm {
    pub fn new(n_words: usize, seed: u64) -> Self {
        let vocab = Vocab::new((0..n_words).map(|i| format!("w{i}"))).expect("distinct");
        Self { vocab, seed }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl LanguageModel for HashLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        let mut h = splitmix(self.seed);
        for t in context {
            h = splitmix(h ^ u64::from(t.0));
        }
        let mut probs = vec![0.0; self.vocab.len()];
        let mut total = 0.0;
        for (i, p) in probs.iter_mut().enumerate() {
            let id = TokenId(i as u32);
            if Vocab::is_reserved(id) && id != EOS {
                continue;
            }
            let r = splitmix(h ^ (i as u64).wrapping_mul(0x100_0000_01B3));
            *p = 0.05 + (r >> 11) as f64 / (1u64 << 53) as f64;
            total += *p;
        }
        probs.iter_mut().for_each(|p| *p /= total);
        TokenDist::new(probs)
    }
}
