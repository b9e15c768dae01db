//! Next-token distribution interface and its providers.
//!
//! Everything downstream (decoders, the perplexity ranker) only needs
//! [`LanguageModel::next_token_dist`]. Two providers ship with the crate:
//! an add-k smoothed word n-gram model ([`NGramModel`]) and an HTTP client
//! for a remote scoring server ([`RemoteLm`]).

mod ngram;
mod remote;
pub mod toy;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ngram::{train_ngram, NGramModel, NGRAM_FILE_MAGIC};
pub use remote::{LmRequest, LmResponse, RemoteLm, LM_ENDPOINT_ENV};

/// Tolerance on the total mass of a [`TokenDist`].
pub const DIST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("remote scoring failed at {endpoint}: {message}")]
    Remote { endpoint: String, message: String },
    #[error("training failed: {0}")]
    Training(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid token distribution: {0}")]
    InvalidDistribution(String),
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("token id {0} is outside the vocabulary")]
    TokenOutOfRange(u32),
    #[error("sequence must not be empty")]
    EmptySequence,
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Index into a [`Vocab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const BOS: TokenId = TokenId(0);
pub const EOS: TokenId = TokenId(1);
pub const SEP: TokenId = TokenId(2);
pub const UNK: TokenId = TokenId(3);

pub const BOS_TOKEN: &str = "[BOS]";
pub const EOS_TOKEN: &str = "[EOS]";
pub const SEP_TOKEN: &str = "[SEP]";
pub const UNK_TOKEN: &str = "[UNK]";

const RESERVED: [&str; 4] = [BOS_TOKEN, EOS_TOKEN, SEP_TOKEN, UNK_TOKEN];

/// Ordered set of distinct token strings. The four reserved tokens always
/// occupy ids 0..4 in the order BOS, EOS, SEP, UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from word tokens. Reserved token strings in the
    /// input are folded onto their reserved ids; any other repeat is an error.
    pub fn new<I, S>(words: I) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::reserved_only();
        for w in words {
            let w = w.into();
            if RESERVED.contains(&w.as_str()) {
                continue;
            }
            if vocab.index.contains_key(&w) {
                return Err(LmError::DuplicateToken(w));
            }
            vocab.push(w);
        }
        Ok(vocab)
    }

    /// A vocabulary holding only BOS, EOS, SEP and UNK.
    pub fn reserved_only() -> Self {
        let mut vocab = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for r in RESERVED {
            vocab.push(r.to_string());
        }
        vocab
    }

    fn push(&mut self, token: String) -> TokenId {
        let id = TokenId(self.tokens.len() as u32);
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    /// Adds `token` if absent and returns its id.
    pub(crate) fn intern(&mut self, token: &str) -> TokenId {
        match self.index.get(token) {
            Some(&id) => id,
            None => self.push(token.to_string()),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Maps a token to its id, or to UNK.
    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }

    /// Maps ids back to strings. Ids outside the vocabulary become UNK.
    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }

    pub fn is_reserved(id: TokenId) -> bool {
        id.index() < RESERVED.len()
    }
}

/// A probability distribution over a vocabulary, aligned with vocab order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDist {
    probs: Vec<f64>,
}

impl TokenDist {
    /// Validates non-negativity and unit mass within [`DIST_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self, LmError> {
        if probs.is_empty() {
            return Err(LmError::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(LmError::InvalidDistribution(format!("entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DIST_TOLERANCE {
            return Err(LmError::InvalidDistribution(format!("mass {total}")));
        }
        Ok(Self { probs })
    }

    /// The uniform distribution over `n` entries.
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Anything that yields `P(x_t | x_1..x_{t-1})` over a fixed vocabulary.
///
/// Implementations must be pure: the same context always produces the same
/// distribution. Contexts passed by this crate start with [`BOS`].
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Vocab;

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError>;
}

impl<L: LanguageModel + ?Sized> LanguageModel for &L {
    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }
    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        (**self).next_token_dist(context)
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for Box<L> {
    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }
    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        (**self).next_token_dist(context)
    }
}

impl<L: LanguageModel + ?Sized> LanguageModel for Arc<L> {
    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }
    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        (**self).next_token_dist(context)
    }
}

/// Log-probability of `continuation` given an explicit `context`.
pub fn conditional_logprob<L: LanguageModel + ?Sized>(
    lm: &L,
    context: &[TokenId],
    continuation: &[TokenId],
) -> Result<f64, LmError> {
    let mut ctx = context.to_vec();
    let mut total = 0.0;
    for &tok in continuation {
        let dist = lm.next_token_dist(&ctx)?;
        total += dist.prob(tok).ln();
        ctx.push(tok);
    }
    Ok(total)
}

/// `Σ_t ln p(x_t | BOS, x_1..x_{t-1})`.
pub fn sequence_logprob<L: LanguageModel + ?Sized>(
    lm: &L,
    tokens: &[TokenId],
) -> Result<f64, LmError> {
    if tokens.is_empty() {
        return Err(LmError::EmptySequence);
    }
    conditional_logprob(lm, &[BOS], tokens)
}

/// `exp(-logprob / |tokens|)`.
pub fn perplexity<L: LanguageModel + ?Sized>(lm: &L, tokens: &[TokenId]) -> Result<f64, LmError> {
    let lp = sequence_logprob(lm, tokens)?;
    Ok((-lp / tokens.len() as f64).exp())
}

/// Uniform distribution over its vocabulary, whatever the context.
#[derive(Debug, Clone)]
pub struct UniformLm {
    vocab: Vocab,
}

impl UniformLm {
    pub fn new(vocab: Vocab) -> Self {
        Self { vocab }
    }
}

impl LanguageModel for UniformLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_dist(&self, _context: &[TokenId]) -> Result<TokenDist, LmError> {
        Ok(TokenDist::uniform(self.vocab.len()))
    }
}

/// Wraps a model and counts `next_token_dist` calls.
#[derive(Debug)]
pub struct CountingLm<L> {
    inner: L,
    calls: AtomicUsize,
}

impl<L> CountingLm<L> {
    pub fn new(inner: L) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn into_inner(self) -> L {
        self.inner
    }
}

impl<L: LanguageModel> LanguageModel for CountingLm<L> {
    fn vocab(&self) -> &Vocab {
        self.inner.vocab()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.next_token_dist(context)
    }
}

/// Which provider backs a [`LanguageModelHandle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Ngram,
    Remote,
}

/// A model chosen at run time from configuration.
#[derive(Debug)]
pub enum LanguageModelHandle {
    Ngram(NGramModel),
    Remote(RemoteLm),
}

impl LanguageModelHandle {
    pub fn provider(&self) -> Provider {
        match self {
            Self::Ngram(_) => Provider::Ngram,
            Self::Remote(_) => Provider::Remote,
        }
    }
}

impl LanguageModel for LanguageModelHandle {
    fn vocab(&self) -> &Vocab {
        match self {
            Self::Ngram(m) => m.vocab(),
            Self::Remote(m) => m.vocab(),
        }
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        match self {
            Self::Ngram(m) => m.next_token_dist(context),
            Self::Remote(m) => m.next_token_dist(context),
        }
    }
}
