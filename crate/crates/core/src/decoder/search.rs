use std::cmp::Ordering;
use std::collections::HashSet;

use super::{
    by_satisfaction, by_score, satisfaction, BeamCandidate, ConstraintSet, DecodeConfig,
    DecodeError, Signature,
};
use crate::lm::{LanguageModel, TokenId, Vocab, BOS, EOS, SEP, UNK};

/// What one decoding step did. Collected by [`neurologic_decode_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// 1-based step number, equal to the length of the hypotheses it produced.
    pub step: usize,
    /// Live hypotheses expanded, one model call each.
    pub lm_calls: usize,
    /// Candidates created by expansion.
    pub expanded: usize,
    /// Candidates left after the likelihood and constraint-count filters.
    pub survivors: usize,
    /// Distinct signatures among the survivors.
    pub groups: usize,
    /// Hypotheses kept this step, finished ones included.
    pub kept: Vec<BeamCandidate>,
}

struct Hyp {
    tokens: Vec<TokenId>,
    logprob: f64,
    signature: Signature,
}

struct Expansion {
    parent: usize,
    token: TokenId,
    logprob: f64,
    signature: Signature,
}

/// BOS, SEP and UNK are never generated.
fn generable(id: TokenId) -> bool {
    !matches!(id, BOS | SEP | UNK)
}

fn token_masks(vocab: &Vocab, constraints: &ConstraintSet) -> Vec<Signature> {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            if constraints.is_empty() || Vocab::is_reserved(TokenId(i as u32)) {
                Signature(0)
            } else {
                satisfaction(&[tok], constraints)
            }
        })
        .collect()
}

fn expand<L: LanguageModel + ?Sized>(
    lm: &L,
    prompt: &[TokenId],
    beam: &[Hyp],
    masks: &[Signature],
) -> Result<Vec<Expansion>, DecodeError> {
    let mut out = Vec::with_capacity(beam.len() * masks.len());
    let mut ctx = Vec::with_capacity(1 + prompt.len() + 32);
    for (parent, hyp) in beam.iter().enumerate() {
        ctx.clear();
        ctx.push(BOS);
        ctx.extend_from_slice(prompt);
        ctx.extend_from_slice(&hyp.tokens);
        let dist = lm.next_token_dist(&ctx)?;
        for (i, &p) in dist.probs().iter().enumerate().take(masks.len()) {
            let token = TokenId(i as u32);
            if p <= 0.0 || !generable(token) {
                continue;
            }
            out.push(Expansion {
                parent,
                token,
                logprob: hyp.logprob + p.ln(),
                signature: hyp.signature.union(masks[i]),
            });
        }
    }
    Ok(out)
}

/// Higher probability first, then lexicographically smaller sequence.
fn by_likelihood(beam: &[Hyp], a: &Expansion, b: &Expansion) -> Ordering {
    b.logprob
        .total_cmp(&a.logprob)
        .then_with(|| beam[a.parent].tokens.cmp(&beam[b.parent].tokens))
        .then(a.token.cmp(&b.token))
}

struct Selection {
    /// Indices into the expansion list, in likelihood order.
    kept: Vec<usize>,
    survivors: usize,
    groups: usize,
}

fn likelihood_order(beam: &[Hyp], exps: &[Expansion]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..exps.len()).collect();
    order.sort_by(|&a, &b| by_likelihood(beam, &exps[a], &exps[b]));
    order
}

fn select_top_k(beam: &[Hyp], exps: &[Expansion], config: &DecodeConfig) -> Selection {
    let mut kept = likelihood_order(beam, exps);
    kept.truncate(config.beam_k);
    Selection {
        survivors: exps.len(),
        groups: 1.min(exps.len()),
        kept,
    }
}

fn select_constrained(beam: &[Hyp], exps: &[Expansion], config: &DecodeConfig) -> Selection {
    let n = exps.len();
    let by_lp = likelihood_order(beam, exps);

    let mut in_alpha = vec![false; n];
    for &i in by_lp.iter().take(config.alpha) {
        in_alpha[i] = true;
    }

    let mut by_count = by_lp.clone();
    by_count.sort_by(|&a, &b| {
        exps[b]
            .signature
            .count()
            .cmp(&exps[a].signature.count())
            .then_with(|| by_likelihood(beam, &exps[a], &exps[b]))
    });
    let mut in_beta = vec![false; n];
    for &i in by_count.iter().take(config.beta) {
        in_beta[i] = true;
    }

    let survivors: Vec<usize> = by_lp
        .into_iter()
        .filter(|&i| in_alpha[i] && in_beta[i])
        .collect();

    // The first survivor seen for a signature is its group's best.
    let mut seen = HashSet::new();
    let (leaders, rest): (Vec<usize>, Vec<usize>) = survivors
        .iter()
        .partition(|&&i| seen.insert(exps[i].signature));

    let mut kept: Vec<usize> = leaders.iter().copied().take(config.beam_k).collect();
    let room = config.beam_k - kept.len();
    kept.extend(rest.iter().copied().take(room));
    kept.sort_by(|&a, &b| by_likelihood(beam, &exps[a], &exps[b]));

    Selection {
        survivors: survivors.len(),
        groups: seen.len(),
        kept,
    }
}

fn decode<L, F>(
    lm: &L,
    prompt: &[TokenId],
    constraints: &ConstraintSet,
    config: &DecodeConfig,
    select: F,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<Vec<BeamCandidate>, DecodeError>
where
    L: LanguageModel + ?Sized,
    F: Fn(&[Hyp], &[Expansion], &DecodeConfig) -> Selection,
{
    config.validate()?;
    let masks = token_masks(lm.vocab(), constraints);
    let mut beam = vec![Hyp {
        tokens: Vec::new(),
        logprob: 0.0,
        signature: Signature(0),
    }];
    let mut done = Vec::new();

    for step in 1..=config.max_len {
        if beam.is_empty() {
            break;
        }
        let exps = expand(lm, prompt, &beam, &masks)?;
        let sel = select(&beam, &exps, config);
        let mut next = Vec::with_capacity(sel.kept.len());
        let mut kept_trace = Vec::new();
        for &i in &sel.kept {
            let e = &exps[i];
            let mut tokens = Vec::with_capacity(step);
            tokens.extend_from_slice(&beam[e.parent].tokens);
            tokens.push(e.token);
            let hyp = Hyp {
                tokens,
                logprob: e.logprob,
                signature: e.signature,
            };
            if trace.is_some() {
                kept_trace.push(BeamCandidate {
                    tokens: hyp.tokens.clone(),
                    logprob: hyp.logprob,
                    score: hyp.logprob,
                    signature: hyp.signature,
                    finished: e.token == EOS,
                });
            }
            if e.token == EOS {
                done.push((hyp, true));
            } else {
                next.push(hyp);
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(StepTrace {
                step,
                lm_calls: beam.len(),
                expanded: exps.len(),
                survivors: sel.survivors,
                groups: sel.groups,
                kept: kept_trace,
            });
        }
        beam = next;
    }
    done.extend(beam.into_iter().map(|h| (h, false)));

    Ok(done
        .into_iter()
        .map(|(h, finished)| BeamCandidate {
            score: config.normalize(h.logprob, h.tokens.len()),
            tokens: h.tokens,
            logprob: h.logprob,
            signature: h.signature,
            finished,
        })
        .collect())
}

/// Plain beam search. Returns at most `beam_k` finished or max-length
/// candidates, best first.
pub fn beam_search<L: LanguageModel + ?Sized>(
    lm: &L,
    prompt: &[TokenId],
    config: &DecodeConfig,
) -> Result<Vec<BeamCandidate>, DecodeError> {
    let mut out = decode(
        lm,
        prompt,
        &ConstraintSet::empty(),
        config,
        select_top_k,
        None,
    )?;
    out.sort_by(by_score);
    out.truncate(config.beam_k);
    Ok(out)
}

/// Constrained beam search over the words of `constraints`. Output is
/// ordered by satisfied count, then score; at most `beam_k` entries.
pub fn neurologic_decode<L: LanguageModel + ?Sized>(
    lm: &L,
    prompt: &[TokenId],
    constraints: &ConstraintSet,
    config: &DecodeConfig,
) -> Result<Vec<BeamCandidate>, DecodeError> {
    finish_constrained(
        decode(lm, prompt, constraints, config, select_constrained, None)?,
        config,
    )
}

/// [`neurologic_decode`] that also reports every step.
pub fn neurologic_decode_traced<L: LanguageModel + ?Sized>(
    lm: &L,
    prompt: &[TokenId],
    constraints: &ConstraintSet,
    config: &DecodeConfig,
) -> Result<(Vec<BeamCandidate>, Vec<StepTrace>), DecodeError> {
    let mut trace = Vec::new();
    let out = decode(
        lm,
        prompt,
        constraints,
        config,
        select_constrained,
        Some(&mut trace),
    )?;
    Ok((finish_constrained(out, config)?, trace))
}

fn finish_constrained(
    mut out: Vec<BeamCandidate>,
    config: &DecodeConfig,
) -> Result<Vec<BeamCandidate>, DecodeError> {
    out.sort_by(by_satisfaction);
    out.truncate(config.beam_k);
    Ok(out)
}
