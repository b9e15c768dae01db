use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::{Background, RankerConfig, RankerKind};
use super::{GenerationMode, PipelineError};
use crate::decoder::DecodeConfig;
use crate::lm::LM_ENDPOINT_ENV;
use crate::metrics::{CoverageMode, EvalOptions};
use crate::rankers::{AutoScoreWeights, WsdmParams, SCORER_ENDPOINT_ENV};

/// Every key accepted in a config file or as a CLI override.
pub const CONFIG_KEYS: &[&str] = &[
    "data",
    "lm",
    "mode",
    "ranker",
    "beam",
    "alpha",
    "beta",
    "max_len",
    "gamma",
    "templates",
    "out",
    "workers",
    "wsdm_mu",
    "wsdm_window",
    "wsdm_lambda_t",
    "wsdm_lambda_o",
    "wsdm_lambda_u",
    "wsdm_background",
    "autoscore_weights",
    "scorer_endpoint",
    "scorer_concurrent",
    "fallback_wsdm",
    "rouge_beta",
    "coverage",
];

fn defaults() -> BTreeMap<String, String> {
    [
        ("mode", "zsfc"),
        ("ranker", "ppl"),
        ("beam", "20"),
        ("max_len", "20"),
        ("gamma", "0"),
        ("workers", "4"),
        ("wsdm_mu", "25"),
        ("wsdm_window", "8"),
        ("wsdm_lambda_t", "1"),
        ("wsdm_lambda_o", "1"),
        ("wsdm_lambda_u", "1"),
        ("wsdm_background", "uniform"),
        ("autoscore_weights", "1,1,1"),
        ("scorer_concurrent", "false"),
        ("fallback_wsdm", "true"),
        ("rouge_beta", "1"),
        ("coverage", "containment"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Where next-token distributions come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmSpec {
    Ngram(PathBuf),
    Remote(String),
}

/// The configuration sources of a run, lowest precedence first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigLayers {
    pub defaults: BTreeMap<String, String>,
    /// Endpoint variables read from the process environment.
    pub env: BTreeMap<String, String>,
    pub file: BTreeMap<String, String>,
    pub cli: BTreeMap<String, String>,
}

impl ConfigLayers {
    pub fn new(file: BTreeMap<String, String>, cli: BTreeMap<String, String>) -> Self {
        Self {
            defaults: defaults(),
            env: BTreeMap::new(),
            file,
            cli,
        }
    }

    /// Records the endpoint environment variables that are set.
    pub fn with_process_env(mut self) -> Self {
        for var in [LM_ENDPOINT_ENV, SCORER_ENDPOINT_ENV] {
            if let Ok(v) = std::env::var(var) {
                self.env.insert(var.to_string(), v);
            }
        }
        self
    }

    /// Every key's winning value.
    pub fn merged(&self) -> BTreeMap<String, String> {
        let mut out = self.defaults.clone();
        out.extend(self.file.clone());
        out.extend(self.cli.clone());
        out
    }
}

/// Parses `key = value` lines. `#` starts a comment; dashes in keys read as
/// underscores.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("line {}: expected key = value", i + 1))
        })?;
        let key = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(PipelineError::Config(format!(
                "line {}: unknown key {key:?}",
                i + 1
            )));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub lm: LmSpec,
    pub mode: GenerationMode,
    pub ranker: RankerConfig,
    pub decode: DecodeConfig,
    pub templates: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    pub eval: EvalOptions,
    pub layers: ConfigLayers,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, PipelineError>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| PipelineError::Config(format!("{key} = {v:?}: {e}")))
}

impl RunConfig {
    /// Resolves layered settings: CLI over config file over defaults.
    /// `alpha` and `beta` default to 20 times the beam width.
    pub fn resolve(layers: ConfigLayers) -> Result<Self, PipelineError> {
        for key in layers.file.keys().chain(layers.cli.keys()) {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(PipelineError::Config(format!("unknown key {key:?}")));
            }
        }
        let m = layers.merged();
        let get = |k: &str| m.get(k).map(String::as_str);
        let need = |k: &str| {
            get(k).ok_or_else(|| PipelineError::Config(format!("missing required setting {k:?}")))
        };

        let lm = match need("lm")? {
            "remote" => {
                LmSpec::Remote(layers.env.get(LM_ENDPOINT_ENV).cloned().ok_or_else(|| {
                    PipelineError::Config(format!("lm = remote needs {LM_ENDPOINT_ENV}"))
                })?)
            }
            s => {
                if let Some(p) = s.strip_prefix("ngram:") {
                    LmSpec::Ngram(PathBuf::from(p))
                } else if let Some(u) = s.strip_prefix("remote:") {
                    LmSpec::Remote(u.to_string())
                } else {
                    return Err(PipelineError::Config(format!(
                        "lm = {s:?}: expected ngram:PATH, remote:URL or remote"
                    )));
                }
            }
        };

        let beam: usize = parse("beam", need("beam")?)?;
        let decode = DecodeConfig {
            beam_k: beam,
            alpha: get("alpha").map_or(Ok(20 * beam), |v| parse("alpha", v))?,
            beta: get("beta").map_or(Ok(20 * beam), |v| parse("beta", v))?,
            max_len: parse("max_len", need("max_len")?)?,
            length_norm_gamma: parse("gamma", need("gamma")?)?,
        };
        decode
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;

        let weights: Vec<f64> = need("autoscore_weights")?
            .split(',')
            .map(|w| parse("autoscore_weights", w.trim()))
            .collect::<Result<_, _>>()?;
        let weights: [f64; 3] = weights.try_into().map_err(|_| {
            PipelineError::Config("autoscore_weights needs three comma-separated values".into())
        })?;
        let total: f64 = weights.iter().sum();
        let weights = if total > 0.0 {
            weights.map(|w| w / total)
        } else {
            weights
        };

        let ranker = RankerConfig {
            kind: RankerKind::parse(need("ranker")?)?,
            autoscore_weights: AutoScoreWeights(weights),
            wsdm: WsdmParams {
                lambda_t: parse("wsdm_lambda_t", need("wsdm_lambda_t")?)?,
                lambda_o: parse("wsdm_lambda_o", need("wsdm_lambda_o")?)?,
                lambda_u: parse("wsdm_lambda_u", need("wsdm_lambda_u")?)?,
                mu: parse("wsdm_mu", need("wsdm_mu")?)?,
                window: parse("wsdm_window", need("wsdm_window")?)?,
            },
            wsdm_background: Background::parse(need("wsdm_background")?)?,
            scorer_endpoint: get("scorer_endpoint")
                .map(str::to_string)
                .or_else(|| layers.env.get(SCORER_ENDPOINT_ENV).cloned()),
            scorer_concurrent: parse("scorer_concurrent", need("scorer_concurrent")?)?,
            fallback_wsdm: parse("fallback_wsdm", need("fallback_wsdm")?)?,
        };

        let coverage = match need("coverage")? {
            "containment" => CoverageMode::Containment,
            "token_frequency" => CoverageMode::TokenFrequency,
            s => {
                return Err(PipelineError::Config(format!(
                    "unknown coverage mode {s:?}"
                )))
            }
        };
        let workers: usize = parse("workers", need("workers")?)?;
        if workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }

        Ok(Self {
            data: PathBuf::from(need("data")?),
            lm,
            mode: need("mode")?.parse()?,
            ranker,
            decode,
            templates: get("templates").map(PathBuf::from),
            out: PathBuf::from(need("out")?),
            workers,
            eval: EvalOptions {
                rouge_beta: parse("rouge_beta", need("rouge_beta")?)?,
                coverage,
            },
            layers,
        })
    }

    /// Reads the optional config file and resolves it under `cli`.
    pub fn load(file: Option<&Path>, cli: BTreeMap<String, String>) -> Result<Self, PipelineError> {
        let file_layer = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        Self::resolve(ConfigLayers::new(file_layer, cli).with_process_env())
    }
}
