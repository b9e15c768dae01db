//! Zero-shot clarifying question generation for conversational search:
//! language models, facet-constrained beam search, template prompting,
//! candidate rankers, evaluation metrics and the batch pipeline.

pub mod decoder;
pub mod lm;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
pub mod rankers;
pub mod text;

pub use decoder::{
    beam_search, neurologic_decode, BeamCandidate, ConstraintSet, DecodeConfig, DecodeError,
    Signature,
};
pub use lm::{
    train_ngram, LanguageModel, LanguageModelHandle, LmError, NGramModel, RemoteLm, TokenDist,
    TokenId, Vocab,
};
pub use metrics::{EvalMode, EvalOptions, EvalReport, EvalSummary, MetricError};
pub use pipeline::{
    generate_for_row, load_dataset, run, DatasetRow, GenerationMode, GenerationRecord,
    PipelineError, RunConfig,
};
pub use prompting::{build_prompts, TemplateSet, DEFAULT_TEMPLATES};
pub use rankers::{RankError, RankedList};
