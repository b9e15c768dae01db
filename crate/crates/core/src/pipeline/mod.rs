//! Dataset ingestion, per-row generation in every mode, configuration and
//! the run loop that ties them together.

mod config;
mod dataset;
mod generate;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::DecodeError;
use crate::lm::LmError;
use crate::metrics::MetricError;
use crate::prompting::PromptError;
use crate::rankers::RankError;

pub use config::{parse_config_file, ConfigLayers, LmSpec, RunConfig, CONFIG_KEYS};
pub use dataset::{load_dataset, parse_dataset};
pub use generate::{
    generate_for_row, prompt_instruction, Background, GenerationContext, Ranker, RankerConfig,
    RankerKind,
};
pub use run::{
    read_generations, report_paths, run, write_generations, RowFailure, RunHeader, RunOutcome,
};

/// One `(query, facet, reference question)` example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub query: String,
    pub facet: String,
    pub reference_question: String,
}

/// The zero-shot generation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenerationMode {
    /// Facet words as decoding constraints over all eight templates, ranked.
    #[serde(rename = "zsfc")]
    Zsfc,
    /// Plain beam search over all eight templates, ranked.
    #[serde(rename = "template_0")]
    Template0,
    /// Plain beam search on the query alone.
    #[serde(rename = "q_gpt_0")]
    QGpt0,
    /// Plain beam search on `facet [SEP] query`.
    #[serde(rename = "qf_gpt_0")]
    QfGpt0,
    /// Plain beam search on the query followed by an instruction sentence.
    #[serde(rename = "prompt_0")]
    Prompt0,
    /// Query subject words as constraints over all eight templates, ranked.
    #[serde(rename = "subject_constrained")]
    SubjectConstrained,
    /// `template facet` for every template, perplexity-ranked.
    #[serde(rename = "template_facet")]
    TemplateFacet,
}

impl GenerationMode {
    pub const ALL: [GenerationMode; 7] = [
        Self::Zsfc,
        Self::Template0,
        Self::QGpt0,
        Self::QfGpt0,
        Self::Prompt0,
        Self::SubjectConstrained,
        Self::TemplateFacet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Zsfc => "zsfc",
            Self::Template0 => "template_0",
            Self::QGpt0 => "q_gpt_0",
            Self::QfGpt0 => "qf_gpt_0",
            Self::Prompt0 => "prompt_0",
            Self::SubjectConstrained => "subject_constrained",
            Self::TemplateFacet => "template_facet",
        }
    }

    /// Whether the mode produces one candidate per template.
    pub fn uses_templates(self) -> bool {
        matches!(
            self,
            Self::Zsfc | Self::Template0 | Self::SubjectConstrained | Self::TemplateFacet
        )
    }
}

impl fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GenerationMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown mode {s:?}")))
    }
}

/// A generated question and the template it was prompted with, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateQuestion {
    pub template: Option<String>,
    pub question: String,
}

/// Everything produced for one dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub row_id: usize,
    pub mode: GenerationMode,
    pub ranker: String,
    pub candidates: Vec<CandidateQuestion>,
    /// Aligned with `candidates`.
    #[serde(with = "run::lenient_floats")]
    pub scores: Vec<f64>,
    pub selected_index: usize,
    pub selected: String,
}

/// Failure inside one row's generation.
#[derive(Debug, Error)]
pub enum RowError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Lm(#[from] LmError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 3 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: column {column} is empty")]
    EmptyField { line: usize, column: &'static str },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("row {row_id}: {source}")]
    Row {
        row_id: usize,
        #[source]
        source: RowError,
    },
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl PipelineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Self::MissingFile(path)
        } else {
            Self::Io { path, source }
        }
    }
}
