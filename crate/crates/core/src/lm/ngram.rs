use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use super::{LanguageModel, LmError, TokenDist, TokenId, Vocab, BOS, EOS};
use crate::text::tokenize;

/// First line of a persisted model file.
pub const NGRAM_FILE_MAGIC: &str = "clarq-ngram 1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

/// Word n-gram model with add-k smoothing:
/// `p(w | c) = (count(c, w) + k) / (count(c) + k·|V|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    add_k: f64,
    vocab: Vocab,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

/// Counts every n-gram of the tokenized corpus. Each non-empty line is
/// padded with `n - 1` BOS tokens and terminated by EOS.
pub fn train_ngram<R: BufRead>(corpus: R, n: usize, add_k: f64) -> Result<NGramModel, LmError> {
    if n == 0 {
        return Err(LmError::InvalidParameter("order must be at least 1".into()));
    }
    if !(add_k > 0.0 && add_k.is_finite()) {
        return Err(LmError::InvalidParameter(format!(
            "add_k must be positive, got {add_k}"
        )));
    }
    let mut vocab = Vocab::reserved_only();
    let mut model = NGramModel {
        order: n,
        add_k,
        vocab: Vocab::reserved_only(),
        counts: HashMap::new(),
    };
    let mut lines = 0usize;
    for line in corpus.lines() {
        let line = line?;
        let tokens = tokenize(&line);
        if tokens.is_empty() {
            continue;
        }
        lines += 1;
        let mut seq = vec![BOS; n - 1];
        seq.extend(tokens.iter().map(|t| vocab.intern(t)));
        seq.push(EOS);
        for end in n - 1..seq.len() {
            model.add(seq[end + 1 - n..end].to_vec(), seq[end], 1);
        }
    }
    if lines == 0 {
        return Err(LmError::Training(
            "corpus is empty after tokenization".into(),
        ));
    }
    model.vocab = vocab;
    Ok(model)
}

impl NGramModel {
    fn add(&mut self, context: Vec<TokenId>, token: TokenId, count: u64) {
        let entry = self.counts.entry(context).or_default();
        entry.total += count;
        *entry.next.entry(token).or_default() += count;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    /// Raw count of `token` following `context`. The context must have
    /// exactly `order - 1` entries.
    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.counts
            .get(context)
            .and_then(|c| c.next.get(&token))
            .copied()
            .unwrap_or(0)
    }

    /// Total count of `context` as a history.
    pub fn context_count(&self, context: &[TokenId]) -> u64 {
        self.counts.get(context).map_or(0, |c| c.total)
    }

    /// The last `order - 1` tokens of `context`, left-padded with BOS.
    fn history(&self, context: &[TokenId]) -> Vec<TokenId> {
        let h = self.order - 1;
        if context.len() >= h {
            context[context.len() - h..].to_vec()
        } else {
            let mut out = vec![BOS; h - context.len()];
            out.extend_from_slice(context);
            out
        }
    }

    pub fn load(path: &Path) -> Result<Self, LmError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    /// Line-oriented count file:
    ///
    /// ```text
    /// clarq-ngram 1
    /// order <n>
    /// add_k <k>
    /// vocab <V>
    /// <token>            (V lines, id order)
    /// ngrams <N>
    /// <id_1> .. <id_n> <count>   (N lines, sorted by id sequence)
    /// ```
    pub fn write<W: Write>(&self, mut out: W) -> Result<(), LmError> {
        writeln!(out, "{NGRAM_FILE_MAGIC}")?;
        writeln!(out, "order {}", self.order)?;
        writeln!(out, "add_k {}", self.add_k)?;
        writeln!(out, "vocab {}", self.vocab.len())?;
        for t in self.vocab.tokens() {
            writeln!(out, "{t}")?;
        }
        let mut grams: Vec<(Vec<TokenId>, u64)> = self
            .counts
            .iter()
            .flat_map(|(ctx, c)| {
                c.next.iter().map(move |(&tok, &n)| {
                    let mut g = ctx.clone();
                    g.push(tok);
                    (g, n)
                })
            })
            .collect();
        grams.sort();
        writeln!(out, "ngrams {}", grams.len())?;
        for (g, n) in grams {
            for id in g {
                write!(out, "{id} ")?;
            }
            writeln!(out, "{n}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, LmError> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String), LmError> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(LmError::Format {
                    line: 0,
                    message: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let bad = |line: usize, message: String| LmError::Format { line, message };

        let (n, magic) = next("header")?;
        if magic != NGRAM_FILE_MAGIC {
            return Err(bad(n, format!("unsupported header {magic:?}")));
        }
        let field = |(n, l): (usize, String), key: &str| -> Result<(usize, String), LmError> {
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(|v| (n, v.to_string()))
                .ok_or_else(|| bad(n, format!("expected `{key} <value>`")))
        };
        let (n, v) = field(next("order")?, "order")?;
        let order: usize = v.parse().map_err(|_| bad(n, "bad order".into()))?;
        if order == 0 {
            return Err(bad(n, "order must be at least 1".into()));
        }
        let (n, v) = field(next("add_k")?, "add_k")?;
        let add_k: f64 = v.parse().map_err(|_| bad(n, "bad add_k".into()))?;
        if !(add_k > 0.0 && add_k.is_finite()) {
            return Err(bad(n, "add_k must be positive".into()));
        }
        let (n, v) = field(next("vocab")?, "vocab")?;
        let vocab_len: usize = v.parse().map_err(|_| bad(n, "bad vocab size".into()))?;
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            tokens.push(next("vocab token")?);
        }
        let reserved = Vocab::reserved_only();
        if vocab_len < reserved.len() {
            return Err(bad(n, "vocabulary lacks reserved tokens".into()));
        }
        for (i, (line, t)) in tokens.iter().take(reserved.len()).enumerate() {
            if reserved.tokens()[i] != *t {
                return Err(bad(
                    *line,
                    format!("expected reserved token {}", reserved.tokens()[i]),
                ));
            }
        }
        let vocab = Vocab::new(tokens.into_iter().skip(reserved.len()).map(|(_, t)| t))?;
        let mut model = NGramModel {
            order,
            add_k,
            vocab,
            counts: HashMap::new(),
        };
        let (n, v) = field(next("ngrams")?, "ngrams")?;
        let n_grams: usize = v.parse().map_err(|_| bad(n, "bad n-gram count".into()))?;
        for _ in 0..n_grams {
            let (n, l) = next("n-gram")?;
            let fields: Vec<&str> = l.split(' ').collect();
            if fields.len() != order + 1 {
                return Err(bad(n, format!("expected {} fields", order + 1)));
            }
            let mut ids = Vec::with_capacity(order);
            for f in &fields[..order] {
                let id: u32 = f
                    .parse()
                    .map_err(|_| bad(n, format!("bad token id {f:?}")))?;
                if id as usize >= vocab_len {
                    return Err(bad(n, format!("token id {id} out of range")));
                }
                ids.push(TokenId(id));
            }
            let count: u64 = fields[order]
                .parse()
                .map_err(|_| bad(n, "bad count".into()))?;
            let tok = ids.pop().expect("order >= 1");
            model.add(ids, tok, count);
        }
        Ok(model)
    }
}

impl LanguageModel for NGramModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        if let Some(bad) = context.iter().find(|t| t.index() >= self.vocab.len()) {
            return Err(LmError::TokenOutOfRange(bad.0));
        }
        let history = self.history(context);
        let v = self.vocab.len() as f64;
        let k = self.add_k;
        let probs = match self.counts.get(&history) {
            Some(c) => {
                let denom = c.total as f64 + k * v;
                let mut probs = vec![k / denom; self.vocab.len()];
                for (&tok, &n) in &c.next {
                    probs[tok.index()] = (n as f64 + k) / denom;
                }
                probs
            }
            None => vec![1.0 / v; self.vocab.len()],
        };
        Ok(TokenDist { probs })
    }
}
