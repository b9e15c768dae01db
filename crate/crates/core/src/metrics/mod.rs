//! Word-overlap metrics. Hypotheses are generations, references are gold
//! questions; none of the metrics are symmetric in that order. Every score
//! is scaled to `[0, 100]`.

mod eval;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::words;

pub use eval::{evaluate, evaluate_subset, EvalMode, EvalOptions, EvalReport, EvalSummary};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("no pairs to score")]
    Empty,
    #[error("BLEU order must be 1..=4, got {0}")]
    InvalidOrder(usize),
    #[error("generation for row {0} has no matching dataset row")]
    UnknownRow(usize),
    #[error("row {0} has more than one generation")]
    DuplicateRow(usize),
    #[error("{rows} dataset rows but {generations} generations")]
    Mismatch { rows: usize, generations: usize },
}

/// One scored item, already tokenized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
    pub facet_words: Vec<String>,
}

impl EvalPair {
    /// Tokenizes both sides and splits the facet into words.
    pub fn from_text(reference: &str, hypothesis: &str, facet: &str) -> Self {
        use crate::text::tokenize;
        Self {
            reference: tokenize(reference),
            hypothesis: tokenize(hypothesis),
            facet_words: words(facet),
        }
    }
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU with uniform weights over orders `1..=n`, clipped counts,
/// standard brevity penalty and no smoothing.
pub fn bleu_n(pairs: &[EvalPair], n: usize) -> Result<f64, MetricError> {
    if !(1..=4).contains(&n) {
        return Err(MetricError::InvalidOrder(n));
    }
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for p in pairs {
        hyp_len += p.hypothesis.len();
        ref_len += p.reference.len();
        for order in 1..=n {
            let r = ngrams(&p.reference, order);
            for (g, c) in ngrams(&p.hypothesis, order) {
                matched[order - 1] += c.min(r.get(g).copied().unwrap_or(0));
                total[order - 1] += c;
            }
        }
    }
    if hyp_len == 0 || (0..n).any(|i| matched[i] == 0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..n)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / n as f64;
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * log_precision.exp())
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure of one pair in `[0, 1]`. `beta = 1` is balanced F1.
pub fn rouge_l_pair(reference: &[String], hypothesis: &[String], beta: f64) -> f64 {
    if reference.is_empty() || hypothesis.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(reference, hypothesis) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / hypothesis.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean balanced ROUGE-L F1.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<f64, MetricError> {
    rouge_l_beta(pairs, 1.0)
}

/// Mean ROUGE-L F-measure with recall weight `beta`.
pub fn rouge_l_beta(pairs: &[EvalPair], beta: f64) -> Result<f64, MetricError> {
    mean(pairs, |p| rouge_l_pair(&p.reference, &p.hypothesis, beta))
}

/// Exact-match unigram alignment as `(hyp position, ref position)` pairs in
/// hypothesis order. Each hypothesis word takes the reference slot right
/// after its predecessor's when that slot matches, otherwise the first free
/// matching slot.
fn align(reference: &[String], hypothesis: &[String]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, h) in hypothesis.iter().enumerate() {
        let follow = out
            .last()
            .filter(|&&(pi, _)| pi + 1 == i)
            .map(|&(_, pj)| pj + 1)
            .filter(|&j| j < reference.len() && !used[j] && reference[j] == *h);
        let j = follow.or_else(|| (0..reference.len()).find(|&j| !used[j] && reference[j] == *h));
        if let Some(j) = j {
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Exact-match METEOR of one pair in `[0, 1)`:
/// `Fmean = 10PR / (R + 9P)`, `penalty = 0.5 (chunks / m)^3`.
pub fn meteor_pair(reference: &[String], hypothesis: &[String]) -> f64 {
    let alignment = align(reference, hypothesis);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let mut chunks = 1;
    for w in alignment.windows(2) {
        let ((i0, j0), (i1, j1)) = (w[0], w[1]);
        if i1 != i0 + 1 || j1 != j0 + 1 {
            chunks += 1;
        }
    }
    let p = m as f64 / hypothesis.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}

pub fn meteor(pairs: &[EvalPair]) -> Result<f64, MetricError> {
    mean(pairs, |p| meteor_pair(&p.reference, &p.hypothesis))
}

/// How facet-word presence is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// Mean over pairs of the fraction of distinct facet words that occur in
    /// the hypothesis. A pair without facet words counts as fully covered.
    #[default]
    Containment,
    /// Facet-word tokens over all hypothesis tokens, pooled over the corpus.
    TokenFrequency,
}

pub fn coverage(pairs: &[EvalPair]) -> Result<f64, MetricError> {
    coverage_with(pairs, CoverageMode::Containment)
}

pub fn coverage_with(pairs: &[EvalPair], mode: CoverageMode) -> Result<f64, MetricError> {
    match mode {
        CoverageMode::Containment => mean(pairs, |p| {
            let facet: HashSet<&String> = p.facet_words.iter().collect();
            if facet.is_empty() {
                return 1.0;
            }
            let hyp: HashSet<&String> = p.hypothesis.iter().collect();
            facet.iter().filter(|w| hyp.contains(*w)).count() as f64 / facet.len() as f64
        }),
        CoverageMode::TokenFrequency => {
            if pairs.is_empty() {
                return Err(MetricError::Empty);
            }
            let (mut hits, mut len) = (0usize, 0usize);
            for p in pairs {
                len += p.hypothesis.len();
                hits += p
                    .hypothesis
                    .iter()
                    .filter(|t| p.facet_words.contains(t))
                    .count();
            }
            Ok(if len == 0 {
                0.0
            } else {
                100.0 * hits as f64 / len as f64
            })
        }
    }
}

fn mean(pairs: &[EvalPair], f: impl Fn(&EvalPair) -> f64) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(100.0 * pairs.iter().map(f).sum::<f64>() / pairs.len() as f64)
}
