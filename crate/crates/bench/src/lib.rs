//! Inputs shared by the benchmarks.

use clarq_core::lm::toy::HashLm;
use clarq_core::DatasetRow;

/// A context-dependent model over `w0..w{n-1}`.
pub fn synthetic_lm(n_words: usize) -> HashLm {
    HashLm::new(n_words, 17)
}

/// `n` candidate questions of about a dozen words each.
pub fn candidate_pool(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let words: Vec<String> = (0..12)
                .map(|j| format!("w{}", (i * 7 + j * 3) % 40))
                .collect();
            format!("are you looking for {}", words.join(" "))
        })
        .collect()
}

pub fn sample_row() -> DatasetRow {
    DatasetRow {
        query: "tell me about w3 w5 w8".into(),
        facet: "w11 w13".into(),
        reference_question: "are you looking for w11 w13".into(),
    }
}
