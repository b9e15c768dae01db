//! Weighted sequential dependence scoring with Dirichlet smoothing.
//!
//! For query terms `q_1..q_n` and a candidate `D`:
//!
//! ```text
//! score = λ_T Σ_i     log((tf(q_i, D)               + μ P_bg(q_i))         / (|D| + μ))
//!       + λ_O Σ_i<n   log((#adjacent(q_i, q_i+1, D)  + μ P_bg^O(q_i, q_i+1)) / (|D| + μ))
//!       + λ_U Σ_i<n   log((#window(q_i, q_i+1, D)    + μ P_bg^U(q_i, q_i+1)) / (|D| + μ))
//! ```

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{RankError, RankedList};
use crate::text::{tokenize, words};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsdmParams {
    pub lambda_t: f64,
    pub lambda_o: f64,
    pub lambda_u: f64,
    pub mu: f64,
    /// Unordered window width in tokens: two positions co-occur when they
    /// are fewer than `window` apart.
    pub window: usize,
}

impl Default for WsdmParams {
    fn default() -> Self {
        Self {
            lambda_t: 1.0,
            lambda_o: 1.0,
            lambda_u: 1.0,
            mu: 25.0,
            window: 8,
        }
    }
}

impl WsdmParams {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(RankError::InvalidParams(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.window < 2 {
            return Err(RankError::InvalidParams(format!(
                "window must be >= 2, got {}",
                self.window
            )));
        }
        if [self.lambda_t, self.lambda_o, self.lambda_u]
            .iter()
            .any(|l| !l.is_finite())
        {
            return Err(RankError::InvalidParams("lambdas must be finite".into()));
        }
        Ok(())
    }
}

/// Background probabilities for terms, ordered pairs and unordered pairs.
/// Unlisted entries fall back to a per-family default; every probability is
/// positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionStats {
    unigram: HashMap<String, f64>,
    ordered: HashMap<(String, String), f64>,
    unordered: HashMap<(String, String), f64>,
    unigram_default: f64,
    ordered_default: f64,
    unordered_default: f64,
}

fn unordered_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl CollectionStats {
    /// Uniform over a vocabulary of `vocab_size` terms: `1/V` per term and
    /// `1/V²` per pair.
    pub fn uniform(vocab_size: usize) -> Self {
        let v = vocab_size.max(1) as f64;
        Self {
            unigram: HashMap::new(),
            ordered: HashMap::new(),
            unordered: HashMap::new(),
            unigram_default: 1.0 / v,
            ordered_default: 1.0 / (v * v),
            unordered_default: 1.0 / (v * v),
        }
    }

    /// Uniform over the distinct terms of `docs` and `extra_terms`.
    pub fn uniform_over<S: AsRef<str>>(docs: &[Vec<String>], extra_terms: &[S]) -> Self {
        Self::uniform(Self::observed_vocab(docs, extra_terms).len())
    }

    fn observed_vocab<S: AsRef<str>>(docs: &[Vec<String>], extra_terms: &[S]) -> HashSet<String> {
        docs.iter()
            .flatten()
            .cloned()
            .chain(extra_terms.iter().map(|t| t.as_ref().to_string()))
            .collect()
    }

    /// Estimated from a document pool with add-½ smoothing over the observed
    /// vocabulary; each family sums to 1 over that vocabulary.
    pub fn from_pool<S: AsRef<str>>(
        docs: &[Vec<String>],
        extra_terms: &[S],
        window: usize,
    ) -> Self {
        let v = Self::observed_vocab(docs, extra_terms).len().max(1) as f64;
        let mut unigram: HashMap<String, f64> = HashMap::new();
        let mut ordered: HashMap<(String, String), f64> = HashMap::new();
        let mut unordered: HashMap<(String, String), f64> = HashMap::new();
        let (mut n_t, mut n_o, mut n_u) = (0.0, 0.0, 0.0);
        for d in docs {
            for (j, t) in d.iter().enumerate() {
                *unigram.entry(t.clone()).or_default() += 1.0;
                n_t += 1.0;
                if let Some(next) = d.get(j + 1) {
                    *ordered.entry((t.clone(), next.clone())).or_default() += 1.0;
                    n_o += 1.0;
                }
                for other in d.iter().skip(j + 1).take(window.saturating_sub(1)) {
                    *unordered.entry(unordered_key(t, other)).or_default() += 1.0;
                    n_u += 1.0;
                }
            }
        }
        let pairs_u = v * (v + 1.0) / 2.0;
        let (dt, d_o, du) = (n_t + 0.5 * v, n_o + 0.5 * v * v, n_u + 0.5 * pairs_u);
        unigram.values_mut().for_each(|c| *c = (*c + 0.5) / dt);
        ordered.values_mut().for_each(|c| *c = (*c + 0.5) / d_o);
        unordered.values_mut().for_each(|c| *c = (*c + 0.5) / du);
        Self {
            unigram,
            ordered,
            unordered,
            unigram_default: 0.5 / dt,
            ordered_default: 0.5 / d_o,
            unordered_default: 0.5 / du,
        }
    }

    pub fn term(&self, t: &str) -> f64 {
        self.unigram.get(t).copied().unwrap_or(self.unigram_default)
    }

    pub fn ordered_pair(&self, a: &str, b: &str) -> f64 {
        self.ordered
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(self.ordered_default)
    }

    pub fn unordered_pair(&self, a: &str, b: &str) -> f64 {
        self.unordered
            .get(&unordered_key(a, b))
            .copied()
            .unwrap_or(self.unordered_default)
    }
}

/// Positions `j` with `doc[j] = a` and `doc[j + 1] = b`.
pub fn ordered_count(a: &str, b: &str, doc: &[String]) -> usize {
    doc.windows(2).filter(|w| w[0] == a && w[1] == b).count()
}

/// Position pairs `j < l` with `l - j < window` holding `a` and `b` in
/// either order.
pub fn unordered_count(a: &str, b: &str, doc: &[String], window: usize) -> usize {
    let mut n = 0;
    for j in 0..doc.len() {
        for l in j + 1..doc.len().min(j + window) {
            let (x, y) = (&doc[j], &doc[l]);
            if (x == a && y == b) || (x == b && y == a) {
                n += 1;
            }
        }
    }
    n
}

pub fn wsdm_score<S: AsRef<str>>(
    query_terms: &[S],
    candidate: &[String],
    params: &WsdmParams,
    stats: &CollectionStats,
) -> Result<f64, RankError> {
    if query_terms.is_empty() {
        return Err(RankError::EmptyQueryTerms);
    }
    if candidate.is_empty() {
        return Err(RankError::EmptyCandidate);
    }
    params.validate()?;
    let mu = params.mu;
    let denom = candidate.len() as f64 + mu;
    let smooth = |count: usize, bg: f64| ((count as f64 + mu * bg) / denom).ln();

    let terms: Vec<&str> = query_terms.iter().map(AsRef::as_ref).collect();
    let unigram: f64 = terms
        .iter()
        .map(|q| smooth(candidate.iter().filter(|t| t == q).count(), stats.term(q)))
        .sum();
    let (mut ordered, mut unordered) = (0.0, 0.0);
    for w in terms.windows(2) {
        let (a, b) = (w[0], w[1]);
        ordered += smooth(ordered_count(a, b, candidate), stats.ordered_pair(a, b));
        unordered += smooth(
            unordered_count(a, b, candidate, params.window),
            stats.unordered_pair(a, b),
        );
    }
    Ok(params.lambda_t * unigram + params.lambda_o * ordered + params.lambda_u * unordered)
}

/// Subject words followed by facet words, lowercased, first occurrence kept.
pub fn wsdm_query_terms<S: AsRef<str>, T: AsRef<str>>(
    subject_words: &[S],
    facet_words: &[T],
) -> Vec<String> {
    let mut seen = HashSet::new();
    subject_words
        .iter()
        .map(|s| s.as_ref())
        .chain(facet_words.iter().map(|s| s.as_ref()))
        .flat_map(words)
        .filter(|w| seen.insert(w.clone()))
        .collect()
}

/// Ranks candidate questions by [`wsdm_score`] against the subject and
/// facet words. `stats = None` uses a uniform background over the words
/// observed in the candidates and the query.
pub fn rank_wsdm<S: AsRef<str>, T: AsRef<str>>(
    subject_words: &[S],
    facet_words: &[T],
    candidates: &[String],
    params: &WsdmParams,
    stats: Option<&CollectionStats>,
) -> Result<RankedList, RankError> {
    let terms = wsdm_query_terms(subject_words, facet_words);
    if terms.is_empty() {
        return Err(RankError::EmptyQueryTerms);
    }
    if candidates.is_empty() {
        return Err(RankError::NoCandidates);
    }
    let docs: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
    let owned;
    let stats = match stats {
        Some(s) => s,
        None => {
            owned = CollectionStats::uniform_over(&docs, &terms);
            &owned
        }
    };
    let scores = docs
        .iter()
        .map(|d| wsdm_score(&terms, d, params, stats))
        .collect::<Result<Vec<f64>, RankError>>()?;
    Ok(RankedList::from_scores(&scores))
}
