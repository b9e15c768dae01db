//! Question templates: building decoder inputs, assembling and stripping
//! full questions, and picking out the subject words of a query.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::SEP_TOKEN;
use crate::text::{detokenize, is_punctuation, tokenize};

/// The eight clarifying-question openings, derived from the most common
/// answer 4-grams.
pub const DEFAULT_TEMPLATES: [&str; 8] = [
    "would you like to",
    "do you want to",
    "are you interested in",
    "are you looking for",
    "do you need to",
    "do you need information",
    "do you want information",
    "do you want to know",
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("template set is empty")]
    NoTemplates,
    #[error("duplicate template {0:?}")]
    DuplicateTemplate(String),
    #[error("template file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Ordered, distinct, lowercase templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    templates: Vec<String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: DEFAULT_TEMPLATES.iter().map(|t| t.to_string()).collect(),
        }
    }
}

impl TemplateSet {
    /// Normalizes each template through the tokenizer. Blank entries are
    /// skipped; repeats are an error.
    pub fn new<I, S>(templates: I) -> Result<Self, PromptError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in templates {
            let norm = detokenize(&tokenize(t.as_ref()));
            if norm.is_empty() {
                continue;
            }
            if !seen.insert(norm.clone()) {
                return Err(PromptError::DuplicateTemplate(norm));
            }
            out.push(norm);
        }
        if out.is_empty() {
            return Err(PromptError::NoTemplates);
        }
        Ok(Self { templates: out })
    }

    /// One template per line.
    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(text.lines())
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Decoder input `query [SEP] template` for one template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptedInput {
    pub query: String,
    pub template: String,
    pub decoder_input: Vec<String>,
}

/// One [`PromptedInput`] per template, in template order.
pub fn build_prompts(
    query: &str,
    templates: &TemplateSet,
) -> Result<Vec<PromptedInput>, PromptError> {
    let query_tokens = tokenize(query);
    if query_tokens.is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    Ok(templates
        .templates()
        .iter()
        .map(|t| {
            let mut decoder_input = query_tokens.clone();
            decoder_input.push(SEP_TOKEN.to_string());
            decoder_input.extend(tokenize(t));
            PromptedInput {
                query: query.to_string(),
                template: t.clone(),
                decoder_input,
            }
        })
        .collect())
}

/// `"template body"`, or just the template when the body is empty.
pub fn assemble_question<S: AsRef<str>>(template: &str, body: &[S]) -> String {
    if body.is_empty() {
        template.to_string()
    } else {
        format!("{template} {}", detokenize(body))
    }
}

/// Removes the longest template that prefixes the tokenized question.
/// Without a match the question comes back untouched.
pub fn strip_template(question: &str, templates: &TemplateSet) -> (Option<String>, String) {
    let tokens = tokenize(question);
    let best = templates
        .templates()
        .iter()
        .map(|t| (t, tokenize(t)))
        .filter(|(_, tt)| tokens.starts_with(tt))
        .max_by_key(|(_, tt)| tt.len());
    match best {
        Some((t, tt)) => (Some(t.clone()), detokenize(&tokens[tt.len()..])),
        None => (None, question.to_string()),
    }
}

/// Words that frame a search request rather than name its subject.
pub const SUBJECT_STOPLIST: &[&str] = &[
    "a",
    "about",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "been",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "find",
    "for",
    "from",
    "get",
    "give",
    "go",
    "going",
    "have",
    "help",
    "how",
    "i",
    "im",
    "in",
    "info",
    "information",
    "interested",
    "is",
    "it",
    "its",
    "know",
    "learn",
    "like",
    "look",
    "looking",
    "m",
    "me",
    "more",
    "my",
    "need",
    "of",
    "on",
    "or",
    "please",
    "s",
    "search",
    "searching",
    "see",
    "show",
    "some",
    "something",
    "t",
    "tell",
    "that",
    "the",
    "there",
    "these",
    "this",
    "those",
    "to",
    "want",
    "wanted",
    "was",
    "what",
    "when",
    "where",
    "which",
    "who",
    "why",
    "with",
    "would",
    "you",
    "your",
];

/// Pulls the subject words out of a query.
pub trait SubjectExtractor: Send + Sync {
    fn extract(&self, query: &str) -> Result<Vec<String>, PromptError>;
}

/// [`SUBJECT_STOPLIST`]-based extraction.
#[derive(Debug, Clone, Copy, Default)]
pub struct StoplistExtractor;

impl SubjectExtractor for StoplistExtractor {
    fn extract(&self, query: &str) -> Result<Vec<String>, PromptError> {
        let tokens = tokenize(query);
        if tokens.is_empty() {
            return Err(PromptError::EmptyQuery);
        }
        let mut seen = HashSet::new();
        let mut keep = |t: &&String| seen.insert((*t).clone());
        let content: Vec<String> = tokens
            .iter()
            .filter(|t| !is_punctuation(t) && !SUBJECT_STOPLIST.contains(&t.as_str()))
            .filter(&mut keep)
            .cloned()
            .collect();
        if !content.is_empty() {
            return Ok(content);
        }
        let mut seen = HashSet::new();
        let words: Vec<String> = tokens
            .iter()
            .filter(|t| !is_punctuation(t))
            .filter(|t| seen.insert((*t).clone()))
            .cloned()
            .collect();
        Ok(if words.is_empty() { tokens } else { words })
    }
}

/// Ordered content words of the query, per [`StoplistExtractor`]. Never
/// empty for a non-empty query.
pub fn extract_subject(query: &str) -> Result<Vec<String>, PromptError> {
    StoplistExtractor.extract(query)
}
