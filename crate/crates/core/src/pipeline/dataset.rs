use std::path::Path;

use super::{DatasetRow, PipelineError};

const QUERY_NAMES: &[&str] = &["query", "initial_request", "request", "q"];
const FACET_NAMES: &[&str] = &[
    "facet",
    "facet_desc",
    "facet_keyword",
    "keyword",
    "keywords",
    "f",
];
const QUESTION_NAMES: &[&str] = &[
    "question",
    "clarifying_question",
    "reference",
    "reference_question",
    "cq",
];

#[derive(Clone, Copy, PartialEq)]
enum Column {
    Query,
    Facet,
    Question,
}

fn header_column(name: &str) -> Option<Column> {
    let n = name.trim().to_lowercase();
    if QUERY_NAMES.contains(&n.as_str()) {
        Some(Column::Query)
    } else if FACET_NAMES.contains(&n.as_str()) {
        Some(Column::Facet)
    } else if QUESTION_NAMES.contains(&n.as_str()) {
        Some(Column::Question)
    } else {
        None
    }
}

/// A first line is a header when each of its three fields names a distinct
/// column. Returns the column permutation.
fn detect_header(fields: &[&str]) -> Option<[usize; 3]> {
    if fields.len() != 3 {
        return None;
    }
    let cols: Vec<Column> = fields
        .iter()
        .map(|f| header_column(f))
        .collect::<Option<_>>()?;
    let pos = |c: Column| cols.iter().position(|&x| x == c);
    Some([
        pos(Column::Query)?,
        pos(Column::Facet)?,
        pos(Column::Question)?,
    ])
}

/// Parses tab-separated `query, facet, question` rows. A header naming the
/// columns may reorder them; without one that order is assumed. Blank lines
/// are skipped.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRow>, PipelineError> {
    let mut rows = Vec::new();
    let mut order = [0, 1, 2];
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if std::mem::take(&mut first) {
            if let Some(o) = detect_header(&fields) {
                order = o;
                continue;
            }
        }
        if fields.len() != 3 {
            return Err(PipelineError::ColumnCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let get = |idx: usize, column: &'static str| {
            let v = fields[order[idx]].trim();
            if v.is_empty() {
                Err(PipelineError::EmptyField {
                    line: line_no,
                    column,
                })
            } else {
                Ok(v.to_string())
            }
        };
        rows.push(DatasetRow {
            query: get(0, "query")?,
            facet: get(1, "facet")?,
            reference_question: get(2, "question")?,
        });
    }
    Ok(rows)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRow>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    parse_dataset(&text)
}
