use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use clarq_core::metrics::{evaluate_subset, CoverageMode, EvalMode, EvalOptions, EvalSummary};
use clarq_core::pipeline::{read_generations, run, RunConfig};
use clarq_core::{load_dataset, train_ngram, TemplateSet};

#[derive(Parser)]
#[command(
    name = "clarq",
    version,
    about = "Zero-shot clarifying question generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an add-k n-gram model on a one-sentence-per-line corpus.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        add_k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate one clarifying question per dataset row.
    Generate(Box<GenerateArgs>),
    /// Score a generations file against the dataset references.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalWhich::Both)]
        mode: EvalWhich,
        /// Template file used to strip prefixes in body mode.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        rouge_beta: f64,
        #[arg(long, value_enum, default_value_t = CoverageArg::Containment)]
        coverage: CoverageArg,
        /// Text report path; a JSON twin is written alongside.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalWhich {
    Full,
    Body,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoverageArg {
    Containment,
    TokenFrequency,
}

/// Every flag is optional here; unset flags fall through to the config
/// file and then to built-in defaults.
#[derive(clap::Args)]
struct GenerateArgs {
    /// `key = value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<String>,
    /// `ngram:PATH`, `remote:URL`, or `remote` to read CLARQ_LM_ENDPOINT.
    #[arg(long)]
    lm: Option<String>,
    /// zsfc, template_0, q_gpt_0, qf_gpt_0, prompt_0, subject_constrained or template_facet.
    #[arg(long)]
    mode: Option<String>,
    /// ppl, autoscore, wsdm or external.
    #[arg(long)]
    ranker: Option<String>,
    #[arg(long)]
    beam: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    max_len: Option<String>,
    /// Length normalization exponent.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    templates: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    wsdm_mu: Option<String>,
    #[arg(long)]
    wsdm_window: Option<String>,
    /// uniform or pool.
    #[arg(long)]
    wsdm_background: Option<String>,
    /// Three comma-separated weights for BLEU-1, ROUGE-L and METEOR.
    #[arg(long)]
    autoscore_weights: Option<String>,
    /// Falls back to CLARQ_SCORER_ENDPOINT.
    #[arg(long)]
    scorer_endpoint: Option<String>,
    #[arg(long)]
    scorer_concurrent: Option<String>,
    #[arg(long)]
    fallback_wsdm: Option<String>,
    /// containment or token_frequency.
    #[arg(long)]
    coverage: Option<String>,
}

impl GenerateArgs {
    fn overrides(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("data", &self.data),
            ("lm", &self.lm),
            ("mode", &self.mode),
            ("ranker", &self.ranker),
            ("beam", &self.beam),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("max_len", &self.max_len),
            ("gamma", &self.gamma),
            ("templates", &self.templates),
            ("out", &self.out),
            ("workers", &self.workers),
            ("wsdm_mu", &self.wsdm_mu),
            ("wsdm_window", &self.wsdm_window),
            ("wsdm_background", &self.wsdm_background),
            ("autoscore_weights", &self.autoscore_weights),
            ("scorer_endpoint", &self.scorer_endpoint),
            ("scorer_concurrent", &self.scorer_concurrent),
            ("fallback_wsdm", &self.fallback_wsdm),
            ("coverage", &self.coverage),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn train_lm(corpus: &Path, order: usize, add_k: f64, out: &Path) -> Result<()> {
    let file =
        File::open(corpus).with_context(|| format!("opening corpus {}", corpus.display()))?;
    let model = train_ngram(BufReader::new(file), order, add_k)?;
    model
        .save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "trained order-{order} model: {} tokens in vocabulary, written to {}",
        clarq_core::lm::LanguageModel::vocab(&model).len(),
        out.display()
    );
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<ExitCode> {
    let config = RunConfig::load(args.config.as_deref(), args.overrides())?;
    let outcome = run(&config)?;
    for f in &outcome.failures {
        eprintln!("error: {}", f.error);
    }
    if let Some(summary) = &outcome.summary {
        print!("{}", summary.to_table());
    }
    eprintln!(
        "{} of {} rows generated, written to {}",
        outcome.records.len(),
        outcome.records.len() + outcome.failures.len(),
        outcome.generations_path.display()
    );
    Ok(if outcome.succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cmd(
    data: &Path,
    generations: &Path,
    which: EvalWhich,
    templates: Option<&Path>,
    rouge_beta: f64,
    coverage: CoverageArg,
    out: Option<&Path>,
) -> Result<()> {
    let rows = load_dataset(data)?;
    let (_, records) = read_generations(generations)?;
    if records.is_empty() {
        bail!("{} holds no generations", generations.display());
    }
    let templates = match templates {
        Some(p) => TemplateSet::from_file(p)?,
        None => TemplateSet::default(),
    };
    let options = EvalOptions {
        rouge_beta,
        coverage: match coverage {
            CoverageArg::Containment => CoverageMode::Containment,
            CoverageArg::TokenFrequency => CoverageMode::TokenFrequency,
        },
    };
    let eval = |mode| evaluate_subset(&rows, &records, mode, &templates, &options);
    let summary = EvalSummary {
        full: matches!(which, EvalWhich::Full | EvalWhich::Both)
            .then(|| eval(EvalMode::Full))
            .transpose()?,
        body: matches!(which, EvalWhich::Body | EvalWhich::Both)
            .then(|| eval(EvalMode::Body))
            .transpose()?,
    };
    let table = summary.to_table();
    print!("{table}");
    if let Some(out) = out {
        let json_path = if out.extension().is_some_and(|e| e == "json") {
            out.with_extension("report.json")
        } else {
            out.with_extension("json")
        };
        std::fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
        std::fs::write(&json_path, summary.to_json())
            .with_context(|| format!("writing {}", json_path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::TrainLm {
            corpus,
            order,
            add_k,
            out,
        } => train_lm(corpus, *order, *add_k, out).map(|_| ExitCode::SUCCESS),
        Command::Generate(args) => generate(args),
        Command::Evaluate {
            data,
            generations,
            mode,
            templates,
            rouge_beta,
            coverage,
            out,
        } => evaluate_cmd(
            data,
            generations,
            *mode,
            templates.as_deref(),
            *rouge_beta,
            *coverage,
            out.as_deref(),
        )
        .map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
