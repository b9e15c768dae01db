use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigLayers, LmSpec, RunConfig};
use super::dataset::load_dataset;
use super::generate::{generate_for_row, GenerationContext, Ranker};
use super::{GenerationRecord, PipelineError};
use crate::lm::{LanguageModelHandle, NGramModel, RemoteLm};
use crate::metrics::{evaluate_subset, EvalMode, EvalSummary};
use crate::prompting::{StoplistExtractor, TemplateSet};

/// Non-finite scores are written as the strings `"inf"`, `"-inf"` and `"nan"`.
pub(crate) mod lenient_floats {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let reprs: Vec<Repr> = xs
            .iter()
            .map(|&x| {
                if x.is_finite() {
                    Repr::Num(x)
                } else if x.is_nan() {
                    Repr::Text("nan".into())
                } else if x > 0.0 {
                    Repr::Text("inf".into())
                } else {
                    Repr::Text("-inf".into())
                }
            })
            .collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(D::Error::custom(format!("bad score {other:?}"))),
                },
            })
            .collect()
    }
}

/// First line of a generations file: every configuration layer and the
/// resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub layers: ConfigLayers,
    pub resolved: std::collections::BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    run_header: RunHeader,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFailure {
    pub row_id: usize,
    pub error: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<GenerationRecord>,
    pub failures: Vec<RowFailure>,
    pub summary: Option<EvalSummary>,
    pub generations_path: PathBuf,
    pub report_text_path: PathBuf,
    pub report_json_path: PathBuf,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `<stem>.report.txt` and `<stem>.report.json` next to the generations file.
pub fn report_paths(out: &Path) -> (PathBuf, PathBuf) {
    (
        out.with_extension("report.txt"),
        out.with_extension("report.json"),
    )
}

pub fn write_generations(
    path: &Path,
    header: Option<&RunHeader>,
    records: &[GenerationRecord],
) -> Result<(), PipelineError> {
    let io = |e| PipelineError::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    if let Some(h) = header {
        let line = serde_json::to_string(&HeaderLine {
            run_header: h.clone(),
        })
        .expect("header serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a generations file. The run header line, when present, is
/// returned separately.
pub fn read_generations(
    path: &Path,
) -> Result<(Option<RunHeader>, Vec<GenerationRecord>), PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let json_err = |e: serde_json::Error| PipelineError::Json {
            line: i + 1,
            message: e.to_string(),
        };
        if i == 0 && line.starts_with("{\"run_header\"") {
            header = Some(
                serde_json::from_str::<HeaderLine>(&line)
                    .map_err(json_err)?
                    .run_header,
            );
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(json_err)?);
    }
    Ok((header, records))
}

fn open_lm(spec: &LmSpec) -> Result<LanguageModelHandle, PipelineError> {
    Ok(match spec {
        LmSpec::Ngram(p) if !p.exists() => return Err(PipelineError::MissingFile(p.clone())),
        LmSpec::Ngram(p) => LanguageModelHandle::Ngram(NGramModel::load(p)?),
        LmSpec::Remote(url) => LanguageModelHandle::Remote(RemoteLm::connect(url)?),
    })
}

/// Generates for every dataset row, writes the generations file and both
/// evaluation reports. Rows fail independently; records are written in
/// input order whatever the worker count.
pub fn run(config: &RunConfig) -> Result<RunOutcome, PipelineError> {
    let templates = match &config.templates {
        Some(p) => TemplateSet::from_file(p)?,
        None => TemplateSet::default(),
    };
    let rows = load_dataset(&config.data)?;
    let ranker = Ranker::new(config.ranker.clone())?;
    let ctx = GenerationContext {
        decode: config.decode,
        templates: &templates,
        extractor: &StoplistExtractor,
        ranker: &ranker,
    };

    // An unreachable remote model fails every row.
    let lm = match open_lm(&config.lm) {
        Ok(lm) => Ok(lm),
        Err(e @ PipelineError::Lm(crate::lm::LmError::Remote { .. })) => Err(e.to_string()),
        Err(e) => return Err(e),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<GenerationRecord, RowFailure>> = pool.install(|| {
        rows.par_iter()
            .enumerate()
            .map(|(row_id, row)| match &lm {
                Ok(lm) => {
                    generate_for_row(row_id, row, config.mode, lm, &ctx).map_err(|e| RowFailure {
                        row_id,
                        error: e.to_string(),
                    })
                }
                Err(msg) => Err(RowFailure {
                    row_id,
                    error: format!("row {row_id}: {msg}"),
                }),
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }

    let header = RunHeader {
        resolved: config.layers.merged(),
        layers: config.layers.clone(),
    };
    write_generations(&config.out, Some(&header), &records)?;

    let (txt_path, json_path) = report_paths(&config.out);
    let summary = if records.is_empty() {
        None
    } else {
        let full = evaluate_subset(&rows, &records, EvalMode::Full, &templates, &config.eval)?;
        let body = evaluate_subset(&rows, &records, EvalMode::Body, &templates, &config.eval)?;
        let summary = EvalSummary {
            full: Some(full),
            body: Some(body),
        };
        std::fs::write(&txt_path, summary.to_table())
            .map_err(|e| PipelineError::io(&txt_path, e))?;
        std::fs::write(&json_path, summary.to_json())
            .map_err(|e| PipelineError::io(&json_path, e))?;
        Some(summary)
    };

    Ok(RunOutcome {
        records,
        failures,
        summary,
        generations_path: config.out.clone(),
        report_text_path: txt_path,
        report_json_path: json_path,
    })
}
