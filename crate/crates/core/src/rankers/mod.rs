//! Rankers over the prompted candidate questions of one query.

mod external;
mod wsdm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{perplexity, LanguageModel, LmError};
use crate::metrics::{bleu_n, meteor_pair, rouge_l_pair, EvalPair};
use crate::text::tokenize;

pub use external::{
    rank_external, ExternalScorer, ScoreRequest, ScoreResponse, SCORER_ENDPOINT_ENV,
};
pub use wsdm::{
    ordered_count, rank_wsdm, unordered_count, wsdm_query_terms, wsdm_score, CollectionStats,
    WsdmParams,
};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("WSDM query has no terms")]
    EmptyQueryTerms,
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("invalid AutoScore weights: {0}")]
    InvalidWeights(String),
    #[error("invalid WSDM parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("remote ranking failed at {endpoint}: {message}")]
    Remote { endpoint: String, message: String },
}

/// Candidate indices with their scores, best first. Equal scores keep input
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    entries: Vec<(usize, f64)>,
}

impl RankedList {
    /// Ranks by descending score. NaN sorts last.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut entries: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
        entries.sort_by(|a, b| key(b.1).total_cmp(&key(a.1)).then(a.0.cmp(&b.0)));
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn top(&self) -> Option<usize> {
        self.entries.first().map(|e| e.0)
    }

    /// Scores re-aligned to input order.
    pub fn scores_by_index(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        for &(i, s) in &self.entries {
            out[i] = s;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ranks by ascending perplexity of `query + " " + candidate`; the score is
/// the negated perplexity.
pub fn rank_perplexity<L: LanguageModel + ?Sized>(
    lm: &L,
    query: &str,
    candidates: &[String],
) -> Result<RankedList, RankError> {
    if candidates.is_empty() {
        return Err(RankError::NoCandidates);
    }
    let vocab = lm.vocab();
    let scores = candidates
        .iter()
        .map(|c| {
            let ids = vocab.encode(&tokenize(&format!("{query} {c}")));
            Ok(-perplexity(lm, &ids)?)
        })
        .collect::<Result<Vec<f64>, RankError>>()?;
    Ok(RankedList::from_scores(&scores))
}

/// Weights of BLEU-1, ROUGE-L and METEOR in AutoScore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoScoreWeights(pub [f64; 3]);

impl Default for AutoScoreWeights {
    fn default() -> Self {
        Self([1.0 / 3.0; 3])
    }
}

impl AutoScoreWeights {
    pub fn validate(&self) -> Result<(), RankError> {
        if self.0.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(RankError::InvalidWeights(format!(
                "{:?} has a negative entry",
                self.0
            )));
        }
        if self.0.iter().all(|w| *w == 0.0) {
            return Err(RankError::InvalidWeights("all weights are zero".into()));
        }
        Ok(())
    }
}

/// `w1·BLEU-1 + w2·ROUGE-L + w3·METEOR` of each candidate against the query.
pub fn autoscore(query: &str, candidate: &str, weights: &AutoScoreWeights) -> f64 {
    let pair = EvalPair {
        reference: tokenize(query),
        hypothesis: tokenize(candidate),
        facet_words: Vec::new(),
    };
    let bleu = bleu_n(std::slice::from_ref(&pair), 1).unwrap_or(0.0);
    let rouge = 100.0 * rouge_l_pair(&pair.reference, &pair.hypothesis, 1.0);
    let met = 100.0 * meteor_pair(&pair.reference, &pair.hypothesis);
    let [w1, w2, w3] = weights.0;
    w1 * bleu + w2 * rouge + w3 * met
}

pub fn rank_autoscore(
    query: &str,
    candidates: &[String],
    weights: &AutoScoreWeights,
) -> Result<RankedList, RankError> {
    weights.validate()?;
    if candidates.is_empty() {
        return Err(RankError::NoCandidates);
    }
    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| autoscore(query, c, weights))
        .collect();
    Ok(RankedList::from_scores(&scores))
}
