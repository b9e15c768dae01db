use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bleu_n, coverage_with, meteor, rouge_l_beta, CoverageMode, EvalPair, MetricError};
use crate::pipeline::{DatasetRow, GenerationRecord};
use crate::prompting::{strip_template, TemplateSet};
use crate::text::{tokenize, words};

/// Full questions, or question bodies with the template prefix removed from
/// both hypothesis and reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Full,
    Body,
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Body => "body",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub rouge_beta: f64,
    pub coverage: CoverageMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            rouge_beta: 1.0,
            coverage: CoverageMode::Containment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub bleu_4: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub coverage: f64,
    pub n_items: usize,
    /// References left whole because no template prefixes them (body mode).
    pub n_unstripped_references: usize,
    /// Generations left whole because no template prefixes them (body mode).
    pub n_unstripped_hypotheses: usize,
}

impl EvalReport {
    fn from_pairs(
        mode: EvalMode,
        pairs: &[EvalPair],
        options: &EvalOptions,
    ) -> Result<Self, MetricError> {
        Ok(Self {
            mode,
            bleu_1: bleu_n(pairs, 1)?,
            bleu_2: bleu_n(pairs, 2)?,
            bleu_3: bleu_n(pairs, 3)?,
            bleu_4: bleu_n(pairs, 4)?,
            rouge_l: rouge_l_beta(pairs, options.rouge_beta)?,
            meteor: meteor(pairs)?,
            coverage: coverage_with(pairs, options.coverage)?,
            n_items: pairs.len(),
            n_unstripped_references: 0,
            n_unstripped_hypotheses: 0,
        })
    }

    /// Scores in column order: BLEU-1..4, ROUGE-L, METEOR, Coverage.
    pub fn scores(&self) -> [f64; 7] {
        [
            self.bleu_1,
            self.bleu_2,
            self.bleu_3,
            self.bleu_4,
            self.rouge_l,
            self.meteor,
            self.coverage,
        ]
    }
}

/// Reports for both modes, either of which may be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub full: Option<EvalReport>,
    pub body: Option<EvalReport>,
}

const COLUMNS: [&str; 7] = [
    "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "METEOR", "Coverage",
];

impl EvalSummary {
    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.full.iter().chain(self.body.iter())
    }

    /// Aligned plain-text table, one row per mode.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<5} {:>6}", "mode", "items");
        for c in COLUMNS {
            let _ = write!(out, " {c:>8}");
        }
        let _ = writeln!(out, " {:>10}", "unstripped");
        for r in self.reports() {
            let _ = write!(out, "{:<5} {:>6}", r.mode, r.n_items);
            for s in r.scores() {
                let _ = write!(out, " {s:>8.2}");
            }
            let _ = writeln!(out, " {:>10}", r.n_unstripped_references);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Scores every dataset row against its single generation.
pub fn evaluate(
    rows: &[DatasetRow],
    generations: &[GenerationRecord],
    mode: EvalMode,
    templates: &TemplateSet,
    options: &EvalOptions,
) -> Result<EvalReport, MetricError> {
    if rows.len() != generations.len() {
        return Err(MetricError::Mismatch {
            rows: rows.len(),
            generations: generations.len(),
        });
    }
    evaluate_subset(rows, generations, mode, templates, options)
}

/// Like [`evaluate`], but only the rows that have a generation are scored.
pub fn evaluate_subset(
    rows: &[DatasetRow],
    generations: &[GenerationRecord],
    mode: EvalMode,
    templates: &TemplateSet,
    options: &EvalOptions,
) -> Result<EvalReport, MetricError> {
    let mut by_row: HashMap<usize, &GenerationRecord> = HashMap::new();
    for g in generations {
        if g.row_id >= rows.len() {
            return Err(MetricError::UnknownRow(g.row_id));
        }
        if by_row.insert(g.row_id, g).is_some() {
            return Err(MetricError::DuplicateRow(g.row_id));
        }
    }
    let mut ids: Vec<usize> = by_row.keys().copied().collect();
    ids.sort_unstable();

    let mut pairs = Vec::with_capacity(ids.len());
    let (mut bare_refs, mut bare_hyps) = (0, 0);
    for id in ids {
        let row = &rows[id];
        let hyp = &by_row[&id].selected;
        let (reference, hypothesis) = match mode {
            EvalMode::Full => (tokenize(&row.reference_question), tokenize(hyp)),
            EvalMode::Body => {
                let (rt, rb) = strip_template(&row.reference_question, templates);
                let (ht, hb) = strip_template(hyp, templates);
                bare_refs += usize::from(rt.is_none());
                bare_hyps += usize::from(ht.is_none());
                (tokenize(&rb), tokenize(&hb))
            }
        };
        pairs.push(EvalPair {
            reference,
            hypothesis,
            facet_words: words(&row.facet),
        });
    }
    let mut report = EvalReport::from_pairs(mode, &pairs, options)?;
    report.n_unstripped_references = bare_refs;
    report.n_unstripped_hypotheses = bare_hyps;
    Ok(report)
}
