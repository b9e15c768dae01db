//! Randomized invariant checks, each run through a deterministic proptest
//! runner for a given number of cases.

use clarq_core::decoder::{
    neurologic_decode, neurologic_decode_traced, satisfaction, ConstraintSet, DecodeConfig,
};
use clarq_core::lm::toy::HashLm;
use clarq_core::lm::{
    conditional_logprob, perplexity, sequence_logprob, train_ngram, CountingLm, LanguageModel,
    TokenId, UniformLm, Vocab, BOS,
};
use clarq_core::metrics::{
    bleu_n, coverage, evaluate, meteor, rouge_l, EvalMode, EvalOptions, EvalPair,
};
use clarq_core::pipeline::{
    generate_for_row, CandidateQuestion, DatasetRow, GenerationContext, GenerationMode,
    GenerationRecord, Ranker, RankerConfig, RankerKind,
};
use clarq_core::prompting::{
    assemble_question, build_prompts, extract_subject, strip_template, StoplistExtractor,
};
use clarq_core::rankers::{
    ordered_count, rank_autoscore, rank_perplexity, rank_wsdm, unordered_count, wsdm_score,
    AutoScoreWeights, CollectionStats, RankedList, WsdmParams,
};
use clarq_core::text::{detokenize, tokenize, words};
use clarq_core::TemplateSet;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type MetricFn = fn(&[EvalPair]) -> Result<f64, clarq_core::MetricError>;

pub type Check = fn(u32) -> Result<(), String>;

pub struct Invariant {
    pub module: &'static str,
    pub name: &'static str,
    pub check: Check,
}

macro_rules! inv {
    ($module:literal, $f:ident) => {
        Invariant {
            module: $module,
            name: stringify!($f),
            check: $f,
        }
    };
}

pub const ALL: &[Invariant] = &[
    inv!("lm", dist_sums_to_one),
    inv!("lm", uniform_perplexity_is_vocab_size),
    inv!("lm", logprob_additive_over_concatenation),
    inv!("lm", ngram_bit_deterministic),
    inv!("decoder", beam_never_exceeds_k),
    inv!("decoder", groups_bounded),
    inv!("decoder", satisfaction_monotone),
    inv!("decoder", no_constraint_equivalence),
    inv!("decoder", oracle_equivalence),
    inv!("decoder", decode_deterministic),
    inv!("decoder", lm_calls_bounded),
    inv!("prompting", strip_inverts_assemble),
    inv!("prompting", eight_prompts_in_order),
    inv!("prompting", subject_never_empty),
    inv!("rankers", rankers_return_permutations),
    inv!("rankers", wsdm_monotone_in_query_terms),
    inv!("rankers", ordered_count_le_unordered),
    inv!("rankers", wsdm_finite),
    inv!("rankers", autoscore_bleu_only_matches_bleu1),
    inv!("metrics", metrics_within_bounds),
    inv!("metrics", template_facet_coverage_is_100),
    inv!("metrics", body_coverage_matches_full),
    inv!("metrics", zero_pair_lowers_means),
    inv!("pipeline", candidate_counts_per_mode),
    inv!("pipeline", zsfc_coverage_ge_q_gpt_0),
    inv!("pipeline", template_facet_contains_facet),
    inv!("pipeline", jsonl_round_trip),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn fail(msg: impl Into<String>) -> TestCaseError {
    TestCaseError::fail(msg.into())
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| fail(e.to_string()))
}

const LETTERS: &[&str] = &["a", "b", "c", "d", "e", "f"];
/// Disjoint from every default template word.
const CONTENT: &[&str] = &[
    "map", "africa", "pictures", "dinosaur", "recipe", "solar", "cost", "river", "tokyo", "hotel",
    "piano", "bees",
];

fn word_from(pool: &'static [&'static str]) -> impl Strategy<Value = String> {
    prop::sample::select(pool).prop_map(str::to_string)
}

fn sentence(
    pool: &'static [&'static str],
    len: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word_from(pool), len)
}

fn corpus() -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(LETTERS, 1..=6), 1..=6).prop_map(|lines| {
        lines
            .iter()
            .map(|l| l.join(" "))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

// ---- lm ----

pub fn dist_sums_to_one(cases: u32) -> Result<(), String> {
    let s = (
        corpus(),
        1usize..=4,
        0.01f64..2.0,
        sentence(LETTERS, 0..=5),
        any::<u64>(),
    );
    check(cases, s, |(text, n, k, ctx, seed)| {
        let ngram = ok(train_ngram(text.as_bytes(), n, k))?;
        let hash = HashLm::new(5, seed);
        let models: [&dyn LanguageModel; 2] = [&ngram, &hash];
        for lm in models {
            let mut ids = vec![BOS];
            ids.extend(lm.vocab().encode(&ctx));
            let d = ok(lm.next_token_dist(&ids))?;
            let sum: f64 = d.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {}", sum);
            prop_assert!(d.probs().iter().all(|p| *p >= 0.0));
            prop_assert_eq!(d.len(), lm.vocab().len());
        }
        Ok(())
    })
}

pub fn uniform_perplexity_is_vocab_size(cases: u32) -> Result<(), String> {
    let s = (1usize..=30, prop::collection::vec(0u32..34, 1..=12));
    check(cases, s, |(n, raw)| {
        let vocab = ok(Vocab::new((0..n).map(|i| format!("t{i}"))))?;
        let size = vocab.len() as u32;
        let lm = UniformLm::new(vocab);
        let ids: Vec<TokenId> = raw.iter().map(|r| TokenId(r % size)).collect();
        let ppl = ok(perplexity(&lm, &ids))?;
        prop_assert!((ppl - f64::from(size)).abs() <= 1e-9, "{} vs {}", ppl, size);
        Ok(())
    })
}

pub fn logprob_additive_over_concatenation(cases: u32) -> Result<(), String> {
    let s = (
        corpus(),
        1usize..=4,
        0.05f64..1.0,
        sentence(LETTERS, 2..=8),
        any::<prop::sample::Index>(),
    );
    check(cases, s, |(text, n, k, seq, split)| {
        let lm = ok(train_ngram(text.as_bytes(), n, k))?;
        let ids = lm.vocab().encode(&seq);
        let cut = 1 + split.index(ids.len() - 1);
        let (a, b) = ids.split_at(cut);
        let whole = ok(sequence_logprob(&lm, &ids))?;
        let mut ctx = vec![BOS];
        ctx.extend_from_slice(a);
        let parts = ok(sequence_logprob(&lm, a))? + ok(conditional_logprob(&lm, &ctx, b))?;
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0));
        Ok(())
    })
}

pub fn ngram_bit_deterministic(cases: u32) -> Result<(), String> {
    let s = (corpus(), 1usize..=4, 0.01f64..2.0, sentence(LETTERS, 0..=4));
    check(cases, s, |(text, n, k, ctx)| {
        let a = ok(train_ngram(text.as_bytes(), n, k))?;
        let b = ok(train_ngram(text.as_bytes(), n, k))?;
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        ok(a.write(&mut ba))?;
        ok(b.write(&mut bb))?;
        prop_assert_eq!(ba, bb);
        let mut ids = vec![BOS];
        ids.extend(a.vocab().encode(&ctx));
        let (da, db) = (ok(a.next_token_dist(&ids))?, ok(b.next_token_dist(&ids))?);
        prop_assert!(da
            .probs()
            .iter()
            .zip(db.probs())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        Ok(())
    })
}

// ---- decoder ----

#[derive(Debug, Clone)]
struct DecodeCase {
    n_words: usize,
    seed: u64,
    prompt: Vec<u32>,
    constraint_words: Vec<usize>,
    k: usize,
    alpha_extra: usize,
    beta_extra: usize,
    max_len: usize,
}

fn decode_case() -> impl Strategy<Value = DecodeCase> {
    (
        2usize..=8,
        any::<u64>(),
        prop::collection::vec(0u32..8, 0..=3),
        prop::collection::vec(0usize..10, 0..=3),
        1usize..=6,
        0usize..=12,
        0usize..=12,
        1usize..=6,
    )
        .prop_map(
            |(n_words, seed, prompt, constraint_words, k, alpha_extra, beta_extra, max_len)| {
                DecodeCase {
                    n_words,
                    seed,
                    prompt,
                    constraint_words,
                    k,
                    alpha_extra,
                    beta_extra,
                    max_len,
                }
            },
        )
}

impl DecodeCase {
    fn build(&self) -> (HashLm, Vec<TokenId>, ConstraintSet, DecodeConfig) {
        let lm = HashLm::new(self.n_words, self.seed);
        let prompt = self
            .prompt
            .iter()
            .map(|p| {
                lm.vocab()
                    .id(&format!("w{}", *p as usize % self.n_words))
                    .unwrap()
            })
            .collect();
        // Indices past the vocabulary name words the model never emits.
        let constraints =
            ConstraintSet::new(self.constraint_words.iter().map(|i| format!("w{i}"))).unwrap();
        let config = DecodeConfig {
            beam_k: self.k,
            alpha: self.k + self.alpha_extra,
            beta: self.k + self.beta_extra,
            max_len: self.max_len,
            length_norm_gamma: 0.0,
        };
        (lm, prompt, constraints, config)
    }
}

pub fn beam_never_exceeds_k(cases: u32) -> Result<(), String> {
    check(cases, decode_case(), |case| {
        let (lm, prompt, c, cfg) = case.build();
        let (out, trace) = ok(neurologic_decode_traced(&lm, &prompt, &c, &cfg))?;
        prop_assert!(out.len() <= cfg.beam_k);
        for step in &trace {
            prop_assert!(
                step.kept.len() <= cfg.beam_k,
                "step {} kept {}",
                step.step,
                step.kept.len()
            );
            prop_assert!(step.lm_calls <= cfg.beam_k);
        }
        Ok(())
    })
}

pub fn groups_bounded(cases: u32) -> Result<(), String> {
    check(cases, decode_case(), |case| {
        let (lm, prompt, c, cfg) = case.build();
        let (_, trace) = ok(neurologic_decode_traced(&lm, &prompt, &c, &cfg))?;
        for step in &trace {
            prop_assert!(step.groups <= 1usize << c.len());
            prop_assert!(step.groups <= step.survivors);
        }
        Ok(())
    })
}

pub fn satisfaction_monotone(cases: u32) -> Result<(), String> {
    check(cases, decode_case(), |case| {
        let (lm, prompt, c, cfg) = case.build();
        let (_, trace) = ok(neurologic_decode_traced(&lm, &prompt, &c, &cfg))?;
        for pair in trace.windows(2) {
            for cand in &pair[1].kept {
                let prefix = &cand.tokens[..cand.tokens.len() - 1];
                let parent = pair[0]
                    .kept
                    .iter()
                    .find(|p| !p.finished && p.tokens == prefix)
                    .ok_or_else(|| fail(format!("no parent for {:?}", cand.tokens)))?;
                prop_assert!(cand.signature.contains(parent.signature));
                let words = lm.vocab().decode(&cand.tokens);
                prop_assert_eq!(cand.signature, satisfaction(&words, &c));
            }
        }
        Ok(())
    })
}

pub fn no_constraint_equivalence(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        super::check_no_constraint(seed).map_err(fail)
    })
}

pub fn oracle_equivalence(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        super::check_oracle(&super::oracle_instance(seed))
            .map_err(|e| fail(format!("seed {seed}: {e}")))
    })
}

pub fn decode_deterministic(cases: u32) -> Result<(), String> {
    check(cases, decode_case(), |case| {
        let (lm, prompt, c, cfg) = case.build();
        let a = ok(neurologic_decode(&lm, &prompt, &c, &cfg))?;
        let b = ok(neurologic_decode(&lm, &prompt, &c, &cfg))?;
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn lm_calls_bounded(cases: u32) -> Result<(), String> {
    check(cases, decode_case(), |case| {
        let (lm, prompt, c, cfg) = case.build();
        let counting = CountingLm::new(lm);
        ok(neurologic_decode(&counting, &prompt, &c, &cfg))?;
        prop_assert!(counting.calls() <= cfg.max_len * cfg.beam_k);
        Ok(())
    })
}

// ---- prompting ----

pub fn strip_inverts_assemble(cases: u32) -> Result<(), String> {
    let s = (0usize..8, sentence(CONTENT, 1..=6));
    check(cases, s, |(ti, body)| {
        let templates = TemplateSet::default();
        let t = &templates.templates()[ti];
        let q = assemble_question(t, &body);
        let (got_t, got_b) = strip_template(&q, &templates);
        prop_assert_eq!(got_t.as_deref(), Some(t.as_str()));
        prop_assert_eq!(got_b, detokenize(&body));
        Ok(())
    })
}

pub fn eight_prompts_in_order(cases: u32) -> Result<(), String> {
    check(cases, sentence(CONTENT, 1..=8), |q| {
        let templates = TemplateSet::default();
        let prompts = ok(build_prompts(&q.join(" "), &templates))?;
        prop_assert_eq!(prompts.len(), 8);
        for (p, t) in prompts.iter().zip(templates.templates()) {
            prop_assert_eq!(&p.template, t);
            prop_assert!(p.decoder_input.ends_with(&tokenize(t)));
        }
        Ok(())
    })
}

pub fn subject_never_empty(cases: u32) -> Result<(), String> {
    check(cases, "[a-zA-Z ,.?!']{0,40}", |q| {
        if tokenize(&q).is_empty() {
            prop_assert!(extract_subject(&q).is_err());
        } else {
            prop_assert!(!ok(extract_subject(&q))?.is_empty());
        }
        Ok(())
    })
}

// ---- rankers ----

fn is_permutation(r: &RankedList, n: usize) -> bool {
    let mut o = r.order();
    o.sort_unstable();
    o == (0..n).collect::<Vec<_>>()
}

fn ties_keep_order(r: &RankedList) -> bool {
    r.entries()
        .windows(2)
        .all(|w| w[0].1 != w[1].1 || w[0].0 < w[1].0)
}

pub fn rankers_return_permutations(cases: u32) -> Result<(), String> {
    let s = (
        prop::collection::vec(sentence(CONTENT, 1..=5), 1..=8),
        sentence(CONTENT, 1..=3),
        prop::collection::vec(prop::sample::select(&[0.0, 1.0, -1.0, 2.5][..]), 1..=10),
    );
    check(cases, s, |(cands, query, raw_scores)| {
        let cands: Vec<String> = cands.iter().map(|c| c.join(" ")).collect();
        let q = query.join(" ");
        let lm = HashLm::new(4, 1);
        let lists = [
            RankedList::from_scores(&raw_scores),
            ok(rank_perplexity(&lm, &q, &cands))?,
            ok(rank_autoscore(&q, &cands, &AutoScoreWeights::default()))?,
            ok(rank_wsdm(
                &query,
                &["map"][..],
                &cands,
                &WsdmParams::default(),
                None,
            ))?,
        ];
        prop_assert!(is_permutation(&lists[0], raw_scores.len()));
        for l in &lists {
            prop_assert!(ties_keep_order(l));
        }
        for l in &lists[1..] {
            prop_assert!(is_permutation(l, cands.len()));
        }
        Ok(())
    })
}

pub fn wsdm_monotone_in_query_terms(cases: u32) -> Result<(), String> {
    let s = (
        prop::collection::vec(word_from(&CONTENT[..4]), 1..=4),
        sentence(CONTENT, 1..=10),
        any::<prop::sample::Index>(),
        any::<prop::sample::Index>(),
        1.0f64..100.0,
        2usize..=10,
    );
    check(cases, s, |(terms, doc, pos, pick, mu, window)| {
        let free: Vec<usize> = (0..doc.len())
            .filter(|&i| !terms.contains(&doc[i]))
            .collect();
        if free.is_empty() {
            return Ok(());
        }
        let params = WsdmParams {
            mu,
            window,
            ..WsdmParams::default()
        };
        let stats = CollectionStats::uniform(CONTENT.len());
        let before = ok(wsdm_score(&terms, &doc, &params, &stats))?;
        let mut after_doc = doc.clone();
        after_doc[free[pos.index(free.len())]] = terms[pick.index(terms.len())].clone();
        let after = ok(wsdm_score(&terms, &after_doc, &params, &stats))?;
        prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
        Ok(())
    })
}

pub fn ordered_count_le_unordered(cases: u32) -> Result<(), String> {
    let s = (
        word_from(LETTERS),
        word_from(LETTERS),
        sentence(LETTERS, 0..=15),
        2usize..=10,
    );
    check(cases, s, |(a, b, doc, window)| {
        prop_assert!(ordered_count(&a, &b, &doc) <= unordered_count(&a, &b, &doc, window));
        Ok(())
    })
}

pub fn wsdm_finite(cases: u32) -> Result<(), String> {
    let s = (
        sentence(LETTERS, 1..=5),
        sentence(CONTENT, 1..=12),
        1e-3f64..1e4,
        2usize..=12,
        1usize..=1000,
    );
    check(cases, s, |(terms, doc, mu, window, v)| {
        let params = WsdmParams {
            mu,
            window,
            ..WsdmParams::default()
        };
        let s = ok(wsdm_score(
            &terms,
            &doc,
            &params,
            &CollectionStats::uniform(v),
        ))?;
        prop_assert!(s.is_finite());
        let pool = CollectionStats::from_pool(std::slice::from_ref(&doc), &terms, window);
        prop_assert!(ok(wsdm_score(&terms, &doc, &params, &pool))?.is_finite());
        Ok(())
    })
}

pub fn autoscore_bleu_only_matches_bleu1(cases: u32) -> Result<(), String> {
    let s = (
        sentence(LETTERS, 1..=6),
        prop::collection::vec(sentence(LETTERS, 1..=6), 1..=8),
    );
    check(cases, s, |(query, cands)| {
        let q = query.join(" ");
        let cands: Vec<String> = cands.iter().map(|c| c.join(" ")).collect();
        let r = ok(rank_autoscore(
            &q,
            &cands,
            &AutoScoreWeights([1.0, 0.0, 0.0]),
        ))?;
        let bleu1: Vec<f64> = cands
            .iter()
            .map(|c| {
                let pair = EvalPair {
                    reference: tokenize(&q),
                    hypothesis: tokenize(c),
                    facet_words: Vec::new(),
                };
                bleu_n(&[pair], 1).unwrap()
            })
            .collect();
        prop_assert_eq!(r.order(), RankedList::from_scores(&bleu1).order());
        Ok(())
    })
}

// ---- metrics ----

fn pairs_strategy() -> impl Strategy<Value = Vec<EvalPair>> {
    prop::collection::vec(
        (
            sentence(LETTERS, 0..=8),
            sentence(LETTERS, 0..=8),
            sentence(LETTERS, 0..=3),
        ),
        1..=6,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(reference, hypothesis, facet_words)| EvalPair {
                reference,
                hypothesis,
                facet_words,
            })
            .collect()
    })
}

pub fn metrics_within_bounds(cases: u32) -> Result<(), String> {
    check(cases, pairs_strategy(), |pairs| {
        let mut all = Vec::new();
        for n in 1..=4 {
            all.push(ok(bleu_n(&pairs, n))?);
        }
        all.push(ok(rouge_l(&pairs))?);
        all.push(ok(meteor(&pairs))?);
        all.push(ok(coverage(&pairs))?);
        for v in all {
            prop_assert!((0.0..=100.0 + 1e-9).contains(&v), "{}", v);
        }
        Ok(())
    })
}

fn dataset_strategy() -> impl Strategy<Value = Vec<DatasetRow>> {
    prop::collection::vec(
        (
            sentence(CONTENT, 1..=5),
            sentence(CONTENT, 1..=3),
            sentence(CONTENT, 1..=5),
        ),
        1..=4,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(q, f, r)| DatasetRow {
                query: q.join(" "),
                facet: f.join(" "),
                reference_question: r.join(" "),
            })
            .collect()
    })
}

struct Harness {
    lm: HashLm,
    templates: TemplateSet,
    ranker: Ranker,
    decode: DecodeConfig,
}

impl Harness {
    fn new(seed: u64) -> Self {
        let mut decode = DecodeConfig::with_beam(4);
        decode.max_len = 4;
        Self {
            lm: HashLm::new(6, seed),
            templates: TemplateSet::default(),
            ranker: Ranker::new(RankerConfig {
                kind: RankerKind::Wsdm,
                ..RankerConfig::default()
            })
            .unwrap(),
            decode,
        }
    }

    fn generate(
        &self,
        rows: &[DatasetRow],
        mode: GenerationMode,
    ) -> Result<Vec<GenerationRecord>, TestCaseError> {
        let ctx = GenerationContext {
            decode: self.decode,
            templates: &self.templates,
            extractor: &StoplistExtractor,
            ranker: &self.ranker,
        };
        rows.iter()
            .enumerate()
            .map(|(i, r)| ok(generate_for_row(i, r, mode, &self.lm, &ctx)))
            .collect()
    }
}

fn report(
    rows: &[DatasetRow],
    recs: &[GenerationRecord],
    mode: EvalMode,
) -> Result<f64, TestCaseError> {
    Ok(ok(evaluate(
        rows,
        recs,
        mode,
        &TemplateSet::default(),
        &EvalOptions::default(),
    ))?
    .coverage)
}

pub fn template_facet_coverage_is_100(cases: u32) -> Result<(), String> {
    check(cases, (dataset_strategy(), any::<u64>()), |(rows, seed)| {
        let h = Harness::new(seed);
        let recs = h.generate(&rows, GenerationMode::TemplateFacet)?;
        prop_assert_eq!(report(&rows, &recs, EvalMode::Full)?, 100.0);
        prop_assert_eq!(report(&rows, &recs, EvalMode::Body)?, 100.0);
        Ok(())
    })
}

pub fn body_coverage_matches_full(cases: u32) -> Result<(), String> {
    let s = (
        dataset_strategy(),
        prop::collection::vec((0usize..8, sentence(CONTENT, 0..=5)), 4),
    );
    check(cases, s, |(rows, outs)| {
        let templates = TemplateSet::default();
        let recs: Vec<GenerationRecord> = rows
            .iter()
            .zip(&outs)
            .enumerate()
            .map(|(i, (_, (t, body)))| {
                let q = assemble_question(&templates.templates()[*t], body);
                GenerationRecord {
                    row_id: i,
                    mode: GenerationMode::Template0,
                    ranker: "none".into(),
                    candidates: vec![CandidateQuestion {
                        template: None,
                        question: q.clone(),
                    }],
                    scores: vec![0.0],
                    selected_index: 0,
                    selected: q,
                }
            })
            .collect();
        prop_assert_eq!(
            report(&rows, &recs, EvalMode::Full)?,
            report(&rows, &recs, EvalMode::Body)?
        );
        Ok(())
    })
}

pub fn zero_pair_lowers_means(cases: u32) -> Result<(), String> {
    check(cases, pairs_strategy(), |pairs| {
        let mut more = pairs.clone();
        more.push(EvalPair {
            reference: vec!["a".into()],
            hypothesis: vec!["zzz".into()],
            facet_words: vec!["b".into()],
        });
        let metrics: [MetricFn; 3] = [rouge_l, meteor, coverage];
        for m in metrics {
            let (before, after) = (ok(m(&pairs))?, ok(m(&more))?);
            if before > 0.0 {
                prop_assert!(after < before, "{} -> {}", before, after);
            } else {
                prop_assert_eq!(after, 0.0);
            }
        }
        Ok(())
    })
}

// ---- pipeline ----

fn vocab_rows() -> impl Strategy<Value = Vec<DatasetRow>> {
    let w =
        || prop::sample::select(&["w0", "w1", "w2", "w3", "w4", "w5"][..]).prop_map(str::to_string);
    prop::collection::vec(
        (
            prop::collection::vec(w(), 1..=4),
            prop::collection::vec(w(), 1..=2),
            prop::collection::vec(w(), 1..=4),
        ),
        1..=3,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(q, f, r)| DatasetRow {
                query: q.join(" "),
                facet: f.join(" "),
                reference_question: r.join(" "),
            })
            .collect()
    })
}

pub fn candidate_counts_per_mode(cases: u32) -> Result<(), String> {
    check(cases, (vocab_rows(), any::<u64>()), |(rows, seed)| {
        let h = Harness::new(seed);
        for mode in GenerationMode::ALL {
            for rec in h.generate(&rows, mode)? {
                let want = if mode.uses_templates() { 8 } else { 1 };
                prop_assert_eq!(rec.candidates.len(), want);
                prop_assert_eq!(rec.scores.len(), want);
                prop_assert_eq!(&rec.selected, &rec.candidates[rec.selected_index].question);
            }
        }
        Ok(())
    })
}

pub fn zsfc_coverage_ge_q_gpt_0(cases: u32) -> Result<(), String> {
    check(cases, (vocab_rows(), any::<u64>()), |(rows, seed)| {
        let h = Harness::new(seed);
        let z = h.generate(&rows, GenerationMode::Zsfc)?;
        let q = h.generate(&rows, GenerationMode::QGpt0)?;
        let (cz, cq) = (
            report(&rows, &z, EvalMode::Full)?,
            report(&rows, &q, EvalMode::Full)?,
        );
        prop_assert!(cz >= cq, "zsfc {} < q_gpt_0 {}", cz, cq);
        Ok(())
    })
}

pub fn template_facet_contains_facet(cases: u32) -> Result<(), String> {
    check(cases, (dataset_strategy(), any::<u64>()), |(rows, seed)| {
        let h = Harness::new(seed);
        for (rec, row) in h
            .generate(&rows, GenerationMode::TemplateFacet)?
            .iter()
            .zip(&rows)
        {
            for c in &rec.candidates {
                prop_assert!(c.question.contains(&row.facet));
                let w = words(&c.question);
                prop_assert!(words(&row.facet).iter().all(|f| w.contains(f)));
            }
        }
        Ok(())
    })
}

fn score_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => -1e6f64..1e6,
        1 => Just(f64::NEG_INFINITY),
        1 => Just(f64::INFINITY),
    ]
}

pub fn jsonl_round_trip(cases: u32) -> Result<(), String> {
    let s = (
        0usize..10_000,
        prop::sample::select(&GenerationMode::ALL[..]),
        prop::collection::vec(
            (
                prop::option::of("[a-z ]{0,12}"),
                "\\PC{0,30}",
                score_strategy(),
            ),
            1..=8,
        ),
        "[a-z_]{1,10}",
    );
    check(cases, s, |(row_id, mode, cands, ranker)| {
        let selected_index = row_id % cands.len();
        let rec = GenerationRecord {
            row_id,
            mode,
            ranker,
            candidates: cands
                .iter()
                .map(|(t, q, _)| CandidateQuestion {
                    template: t.clone(),
                    question: q.clone(),
                })
                .collect(),
            scores: cands.iter().map(|c| c.2).collect(),
            selected_index,
            selected: cands[selected_index].1.clone(),
        };
        let line = ok(serde_json::to_string(&rec))?;
        prop_assert!(!line.contains('\n'));
        let back: GenerationRecord = ok(serde_json::from_str(&line))?;
        prop_assert_eq!(back, rec);
        Ok(())
    })
}
