use serde::{Deserialize, Serialize};

use super::{
    CandidateQuestion, DatasetRow, GenerationMode, GenerationRecord, PipelineError, RowError,
};
use crate::decoder::{beam_search, neurologic_decode, select_final, ConstraintSet, DecodeConfig};
use crate::lm::{LanguageModel, SEP_TOKEN};
use crate::prompting::{assemble_question, build_prompts, SubjectExtractor, TemplateSet};
use crate::rankers::{
    rank_autoscore, rank_external, rank_perplexity, rank_wsdm, AutoScoreWeights, CollectionStats,
    ExternalScorer, RankError, RankedList, WsdmParams,
};
use crate::text::{detokenize, tokenize, words};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankerKind {
    Ppl,
    AutoScore,
    Wsdm,
    External,
}

impl RankerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ppl => "ppl",
            Self::AutoScore => "autoscore",
            Self::Wsdm => "wsdm",
            Self::External => "external",
        }
    }

    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        [Self::Ppl, Self::AutoScore, Self::Wsdm, Self::External]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown ranker {s:?}")))
    }
}

/// WSDM background statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    /// Uniform over the words seen in the candidates and query terms.
    #[default]
    Uniform,
    /// Estimated from the row's candidate pool.
    Pool,
}

impl Background {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Pool => "pool",
        }
    }

    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "pool" => Ok(Self::Pool),
            _ => Err(PipelineError::Config(format!(
                "unknown WSDM background {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub kind: RankerKind,
    pub autoscore_weights: AutoScoreWeights,
    pub wsdm: WsdmParams,
    pub wsdm_background: Background,
    pub scorer_endpoint: Option<String>,
    pub scorer_concurrent: bool,
    /// Rank with WSDM when the external scorer fails.
    pub fallback_wsdm: bool,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            kind: RankerKind::Ppl,
            autoscore_weights: AutoScoreWeights::default(),
            wsdm: WsdmParams::default(),
            wsdm_background: Background::Uniform,
            scorer_endpoint: None,
            scorer_concurrent: false,
            fallback_wsdm: true,
        }
    }
}

/// A configured ranker, holding the HTTP client when one is needed.
#[derive(Debug)]
pub struct Ranker {
    config: RankerConfig,
    external: Option<ExternalScorer>,
}

impl Ranker {
    pub fn new(config: RankerConfig) -> Result<Self, PipelineError> {
        config
            .autoscore_weights
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        config
            .wsdm
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let external = match config.kind {
            RankerKind::External => {
                let endpoint = config.scorer_endpoint.as_deref().ok_or_else(|| {
                    PipelineError::Config("external ranker needs a scorer endpoint".into())
                })?;
                Some(ExternalScorer::new(endpoint, config.scorer_concurrent))
            }
            _ => None,
        };
        Ok(Self { config, external })
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    fn wsdm(
        &self,
        subject: &[String],
        facet: &str,
        candidates: &[String],
    ) -> Result<RankedList, RankError> {
        let facet_words = words(facet);
        let params = &self.config.wsdm;
        match self.config.wsdm_background {
            Background::Uniform => rank_wsdm(subject, &facet_words, candidates, params, None),
            Background::Pool => {
                let docs: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
                let mut terms = subject.to_vec();
                terms.extend(facet_words.iter().cloned());
                let stats = CollectionStats::from_pool(&docs, &terms, params.window);
                rank_wsdm(subject, &facet_words, candidates, params, Some(&stats))
            }
        }
    }

    /// Ranks `candidates` and names the ranker that produced the order.
    pub fn rank<L: LanguageModel + ?Sized>(
        &self,
        lm: &L,
        row: &DatasetRow,
        subject: &[String],
        candidates: &[String],
    ) -> Result<(RankedList, String), RankError> {
        let name = self.config.kind.name().to_string();
        let ranked = match self.config.kind {
            RankerKind::Ppl => rank_perplexity(lm, &row.query, candidates)?,
            RankerKind::AutoScore => {
                rank_autoscore(&row.query, candidates, &self.config.autoscore_weights)?
            }
            RankerKind::Wsdm => self.wsdm(subject, &row.facet, candidates)?,
            RankerKind::External => {
                let scorer = self
                    .external
                    .as_ref()
                    .expect("external scorer built in Ranker::new");
                match rank_external(scorer, &row.query, &row.facet, candidates) {
                    Ok(r) => r,
                    Err(RankError::Remote { .. }) if self.config.fallback_wsdm => {
                        return Ok((
                            self.wsdm(subject, &row.facet, candidates)?,
                            "wsdm_fallback".into(),
                        ));
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        Ok((ranked, name))
    }
}

/// Everything shared by the rows of a run.
pub struct GenerationContext<'a> {
    pub decode: DecodeConfig,
    pub templates: &'a TemplateSet,
    pub extractor: &'a dyn SubjectExtractor,
    pub ranker: &'a Ranker,
}

/// The instruction sentence appended to the query in `prompt_0` mode.
pub fn prompt_instruction(facet: &str) -> String {
    format!("Ask a question that contains words in the list [{facet}].")
}

fn decode_body<L: LanguageModel + ?Sized>(
    lm: &L,
    input: &[String],
    constraints: Option<&ConstraintSet>,
    config: &DecodeConfig,
) -> Result<(Vec<String>, f64), RowError> {
    let vocab = lm.vocab();
    let prompt = vocab.encode(input);
    let out = match constraints {
        Some(c) => neurologic_decode(lm, &prompt, c, config)?,
        None => beam_search(lm, &prompt, config)?,
    };
    let best = select_final(&out)?;
    Ok((vocab.decode(best.body()), best.score))
}

fn single<L: LanguageModel + ?Sized>(
    lm: &L,
    input: &[String],
    config: &DecodeConfig,
) -> Result<(Vec<CandidateQuestion>, Vec<f64>, String), RowError> {
    let (body, score) = decode_body(lm, input, None, config)?;
    let cand = CandidateQuestion {
        template: None,
        question: detokenize(&body),
    };
    Ok((vec![cand], vec![score], "none".into()))
}

fn generate_inner<L: LanguageModel + ?Sized>(
    row: &DatasetRow,
    mode: GenerationMode,
    lm: &L,
    ctx: &GenerationContext<'_>,
) -> Result<(Vec<CandidateQuestion>, Vec<f64>, String), RowError> {
    let query_tokens = tokenize(&row.query);
    let constraints = match mode {
        GenerationMode::Zsfc => Some(ConstraintSet::from_facet(&row.facet)?),
        GenerationMode::SubjectConstrained => {
            Some(ConstraintSet::new(ctx.extractor.extract(&row.query)?)?)
        }
        GenerationMode::Template0 => None,
        GenerationMode::QGpt0 => return single(lm, &query_tokens, &ctx.decode),
        GenerationMode::QfGpt0 => {
            let mut input = tokenize(&row.facet);
            input.push(SEP_TOKEN.to_string());
            input.extend(query_tokens);
            return single(lm, &input, &ctx.decode);
        }
        GenerationMode::Prompt0 => {
            let mut input = query_tokens;
            input.extend(tokenize(&prompt_instruction(&row.facet)));
            return single(lm, &input, &ctx.decode);
        }
        GenerationMode::TemplateFacet => {
            let cands: Vec<CandidateQuestion> = ctx
                .templates
                .templates()
                .iter()
                .map(|t| CandidateQuestion {
                    template: Some(t.clone()),
                    question: format!("{t} {}", row.facet),
                })
                .collect();
            let texts: Vec<String> = cands.iter().map(|c| c.question.clone()).collect();
            let ranked = rank_perplexity(lm, &row.query, &texts)?;
            return Ok((cands, ranked.scores_by_index(), "ppl".into()));
        }
    };

    let prompts = build_prompts(&row.query, ctx.templates)?;
    let mut cands = Vec::with_capacity(prompts.len());
    for p in &prompts {
        let (body, _) = decode_body(lm, &p.decoder_input, constraints.as_ref(), &ctx.decode)?;
        cands.push(CandidateQuestion {
            template: Some(p.template.clone()),
            question: assemble_question(&p.template, &body),
        });
    }
    let subject = ctx.extractor.extract(&row.query)?;
    let texts: Vec<String> = cands.iter().map(|c| c.question.clone()).collect();
    let (ranked, name) = ctx.ranker.rank(lm, row, &subject, &texts)?;
    Ok((cands, ranked.scores_by_index(), name))
}

/// Generates and ranks the candidate questions of one row. The selected
/// question is the best-scored candidate; ties go to the earlier template.
pub fn generate_for_row<L: LanguageModel + ?Sized>(
    row_id: usize,
    row: &DatasetRow,
    mode: GenerationMode,
    lm: &L,
    ctx: &GenerationContext<'_>,
) -> Result<GenerationRecord, PipelineError> {
    let (candidates, scores, ranker) = generate_inner(row, mode, lm, ctx)
        .map_err(|source| PipelineError::Row { row_id, source })?;
    let selected_index = RankedList::from_scores(&scores).top().unwrap_or(0);
    Ok(GenerationRecord {
        row_id,
        mode,
        ranker,
        selected: candidates[selected_index].question.clone(),
        candidates,
        scores,
        selected_index,
    })
}
