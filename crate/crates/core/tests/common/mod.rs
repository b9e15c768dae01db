#![allow(dead_code)]

pub mod invariants;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clarq_core::decoder::{
    beam_search, neurologic_decode, satisfaction, BeamCandidate, ConstraintSet, DecodeConfig,
};
use clarq_core::lm::toy::HashLm;
use clarq_core::lm::{LanguageModel, TokenId, Vocab, BOS, EOS, SEP, UNK};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// One complete sequence of the exhaustive search space.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumerated {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
}

/// Every EOS-terminated sequence of at most `max_len` tokens plus every
/// unterminated sequence of exactly `max_len` tokens, with its
/// log-probability given `BOS prompt`. Reserved tokens other than EOS and
/// zero-probability steps are excluded.
pub fn enumerate_all<L: LanguageModel>(
    lm: &L,
    prompt: &[TokenId],
    max_len: usize,
) -> Vec<Enumerated> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::<TokenId>::new(), 0.0f64)];
    while let Some((tokens, lp)) = stack.pop() {
        if tokens.len() == max_len {
            out.push(Enumerated {
                tokens,
                logprob: lp,
            });
            continue;
        }
        let mut ctx = vec![BOS];
        ctx.extend_from_slice(prompt);
        ctx.extend_from_slice(&tokens);
        let dist = lm.next_token_dist(&ctx).expect("toy models never fail");
        for (i, &p) in dist.probs().iter().enumerate() {
            let t = TokenId(i as u32);
            if p <= 0.0 || matches!(t, BOS | SEP | UNK) {
                continue;
            }
            let mut next = tokens.clone();
            next.push(t);
            if t == EOS {
                out.push(Enumerated {
                    tokens: next,
                    logprob: lp + p.ln(),
                });
            } else {
                stack.push((next, lp + p.ln()));
            }
        }
    }
    out
}

fn surface(vocab: &Vocab, tokens: &[TokenId]) -> Vec<String> {
    vocab.decode(tokens)
}

/// Best sequence (highest log-probability, then smallest token ids) for
/// each satisfied-constraint count.
pub fn oracle_best_per_count(
    vocab: &Vocab,
    seqs: &[Enumerated],
    constraints: &ConstraintSet,
) -> BTreeMap<u32, Enumerated> {
    let mut best: BTreeMap<u32, Enumerated> = BTreeMap::new();
    for s in seqs {
        let count = satisfaction(&surface(vocab, &s.tokens), constraints).count();
        let better = match best.get(&count) {
            None => true,
            Some(b) => s.logprob > b.logprob || (s.logprob == b.logprob && s.tokens < b.tokens),
        };
        if better {
            best.insert(count, s.clone());
        }
    }
    best
}

pub fn decoder_best_per_count(out: &[BeamCandidate]) -> BTreeMap<u32, &BeamCandidate> {
    let mut best: BTreeMap<u32, &BeamCandidate> = BTreeMap::new();
    for c in out {
        best.entry(c.satisfied()).or_insert(c);
    }
    best
}

/// A random oracle-sized instance: up to 4 words plus EOS generable,
/// `max_len ≤ 4`, `k = g^max_len`, `alpha = beta = k·g`.
#[derive(Debug)]
pub struct OracleInstance {
    pub lm: HashLm,
    pub prompt: Vec<TokenId>,
    pub constraints: ConstraintSet,
    pub config: DecodeConfig,
}

pub fn oracle_instance(seed: u64) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_words = rng.gen_range(2..=4);
    let lm = HashLm::new(n_words, rng.gen());
    let max_len = rng.gen_range(1..=4);
    let g = n_words + 1;
    let k = g.pow(max_len as u32);
    let mut names: Vec<String> = (0..n_words).map(|i| format!("w{i}")).collect();
    names.shuffle(&mut rng);
    let n_c = rng.gen_range(1..=2.min(n_words));
    let constraints = ConstraintSet::new(&names[..n_c]).unwrap();
    let prompt_len = rng.gen_range(0..=2);
    let prompt = (0..prompt_len)
        .map(|_| {
            lm.vocab()
                .id(&format!("w{}", rng.gen_range(0..n_words)))
                .unwrap()
        })
        .collect();
    let config = DecodeConfig {
        beam_k: k,
        alpha: k * g,
        beta: k * g,
        max_len,
        length_norm_gamma: 0.0,
    };
    OracleInstance {
        lm,
        prompt,
        constraints,
        config,
    }
}

/// Compares the decoder's best candidate per satisfaction count with the
/// exhaustive oracle.
pub fn check_oracle(inst: &OracleInstance) -> Result<(), String> {
    let out = neurologic_decode(&inst.lm, &inst.prompt, &inst.constraints, &inst.config)
        .map_err(|e| e.to_string())?;
    let seqs = enumerate_all(&inst.lm, &inst.prompt, inst.config.max_len);
    let want = oracle_best_per_count(inst.lm.vocab(), &seqs, &inst.constraints);
    let got = decoder_best_per_count(&out);
    if want.keys().collect::<Vec<_>>() != got.keys().collect::<Vec<_>>() {
        return Err(format!(
            "counts differ: oracle {:?}, decoder {:?}",
            want.keys().collect::<Vec<_>>(),
            got.keys().collect::<Vec<_>>()
        ));
    }
    for (count, w) in &want {
        let g = got[count];
        if g.tokens != w.tokens || (g.logprob - w.logprob).abs() > 1e-9 {
            return Err(format!(
                "count {count}: oracle {:?} ({}), decoder {:?} ({})",
                w.tokens, w.logprob, g.tokens, g.logprob
            ));
        }
    }
    Ok(())
}

/// A random small instance for comparing against plain beam search.
pub fn beam_instance(seed: u64) -> (HashLm, Vec<TokenId>, DecodeConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_words = rng.gen_range(2..=8);
    let lm = HashLm::new(n_words, rng.gen());
    let k = rng.gen_range(1..=6);
    let config = DecodeConfig {
        beam_k: k,
        alpha: rng.gen_range(k..=4 * k),
        beta: rng.gen_range(k..=4 * k),
        max_len: rng.gen_range(1..=6),
        length_norm_gamma: if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..1.5)
        },
    };
    let prompt = (0..rng.gen_range(0..=3))
        .map(|_| {
            lm.vocab()
                .id(&format!("w{}", rng.gen_range(0..n_words)))
                .unwrap()
        })
        .collect();
    (lm, prompt, config)
}

pub fn check_no_constraint(seed: u64) -> Result<(), String> {
    let (lm, prompt, config) = beam_instance(seed);
    let plain = beam_search(&lm, &prompt, &config).map_err(|e| e.to_string())?;
    let constrained = neurologic_decode(&lm, &prompt, &ConstraintSet::empty(), &config)
        .map_err(|e| e.to_string())?;
    let toks = |v: &[BeamCandidate]| v.iter().map(|c| c.tokens.clone()).collect::<Vec<_>>();
    if toks(&plain) != toks(&constrained) {
        return Err(format!(
            "seed {seed}: {:?} vs {:?}",
            toks(&plain),
            toks(&constrained)
        ));
    }
    if plain
        .iter()
        .zip(&constrained)
        .any(|(a, b)| a.score != b.score)
    {
        return Err(format!("seed {seed}: scores differ"));
    }
    Ok(())
}
