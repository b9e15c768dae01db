//! Beam search and facet-constrained beam search.
//!
//! Both decoders expand every live hypothesis with every generable token,
//! then prune to at most `beam_k` hypotheses. The constrained decoder adds
//! two filters before that: a candidate must rank in the top `alpha` by
//! sequence probability *and* in the top `beta` by number of satisfied
//! constraints. Survivors are grouped by [`Signature`]; the best of each
//! group is kept first, remaining slots go to the most probable survivors.

mod constraints;
mod search;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{LmError, TokenId};

pub use constraints::{satisfaction, ConstraintSet, Signature, MAX_CONSTRAINTS};
pub use search::{beam_search, neurologic_decode, neurologic_decode_traced, StepTrace};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error("at most {MAX_CONSTRAINTS} constraint words are supported, got {0}")]
    TooManyConstraints(usize),
    #[error("no candidates to select from")]
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_k: usize,
    /// Keep count of the likelihood filter.
    pub alpha: usize,
    /// Keep count of the constraint-count filter.
    pub beta: usize,
    pub max_len: usize,
    /// Final scores are `logprob / len^gamma`.
    pub length_norm_gamma: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self::with_beam(20)
    }
}

impl DecodeConfig {
    /// `alpha = beta = 20·k`, `max_len = 20`, `gamma = 0`.
    pub fn with_beam(beam_k: usize) -> Self {
        Self {
            beam_k,
            alpha: 20 * beam_k,
            beta: 20 * beam_k,
            max_len: 20,
            length_norm_gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |m: String| Err(DecodeError::InvalidConfig(m));
        if self.beam_k == 0 {
            return bad("beam_k must be at least 1".into());
        }
        if self.alpha < self.beam_k {
            return bad(format!(
                "alpha ({}) must be >= beam_k ({})",
                self.alpha, self.beam_k
            ));
        }
        if self.beta < self.beam_k {
            return bad(format!(
                "beta ({}) must be >= beam_k ({})",
                self.beta, self.beam_k
            ));
        }
        if self.max_len == 0 {
            return bad("max_len must be at least 1".into());
        }
        if !(self.length_norm_gamma >= 0.0 && self.length_norm_gamma.is_finite()) {
            return bad(format!(
                "gamma must be >= 0, got {}",
                self.length_norm_gamma
            ));
        }
        Ok(())
    }

    fn normalize(&self, logprob: f64, len: usize) -> f64 {
        if self.length_norm_gamma == 0.0 || len == 0 {
            logprob
        } else {
            logprob / (len as f64).powf(self.length_norm_gamma)
        }
    }
}

/// A generated continuation of the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamCandidate {
    /// Generated tokens only, the prompt excluded. Ends with EOS when
    /// `finished`.
    pub tokens: Vec<TokenId>,
    /// Cumulative `ln p(tokens | prompt)`.
    pub logprob: f64,
    /// Length-normalized `logprob` used for final ordering.
    pub score: f64,
    pub signature: Signature,
    pub finished: bool,
}

impl BeamCandidate {
    pub fn satisfied(&self) -> u32 {
        self.signature.count()
    }

    /// Tokens with the trailing EOS removed.
    pub fn body(&self) -> &[TokenId] {
        match self.tokens.split_last() {
            Some((&last, rest)) if self.finished && last == crate::lm::EOS => rest,
            _ => &self.tokens,
        }
    }
}

/// Higher score first, then lexicographically smaller token ids.
pub(crate) fn by_score(a: &BeamCandidate, b: &BeamCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// More satisfied constraints first, then [`by_score`].
pub(crate) fn by_satisfaction(a: &BeamCandidate, b: &BeamCandidate) -> Ordering {
    b.satisfied()
        .cmp(&a.satisfied())
        .then_with(|| by_score(a, b))
}

/// The first candidate under (satisfied count desc, score desc, token ids
/// asc).
pub fn select_final(candidates: &[BeamCandidate]) -> Result<&BeamCandidate, DecodeError> {
    candidates
        .iter()
        .min_by(|a, b| by_satisfaction(a, b))
        .ok_or(DecodeError::NoCandidates)
}
