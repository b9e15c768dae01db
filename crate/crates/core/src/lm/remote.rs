//! Client for a remote next-token scoring server.
//!
//! One HTTP `POST` per distribution. Request body `{"context": [tokens]}`,
//! response body `{"tokens": [strings], "logprobs": [reals]}`. The token list
//! of the first response (sent with an empty context) fixes the vocabulary;
//! later responses may list any subset of it, absent tokens get probability 0.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError, TokenDist, TokenId, Vocab};

/// Consulted when no endpoint is given on the command line.
pub const LM_ENDPOINT_ENV: &str = "CLARQ_LM_ENDPOINT";

/// Accepted deviation of the served probability mass from 1 before
/// renormalization.
const MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequest {
    pub context: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmResponse {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

#[derive(Debug)]
pub struct RemoteLm {
    endpoint: String,
    agent: ureq::Agent,
    vocab: Vocab,
}

impl RemoteLm {
    /// Fetches the served vocabulary and returns a ready client.
    pub fn connect(endpoint: &str) -> Result<Self, LmError> {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(60))
            .build();
        let mut lm = Self {
            endpoint: endpoint.to_string(),
            agent,
            vocab: Vocab::reserved_only(),
        };
        let first = lm.call(&[])?;
        lm.vocab =
            Vocab::new(first.tokens).map_err(|e| lm.error(format!("bad vocabulary: {e}")))?;
        Ok(lm)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn error(&self, message: impl Into<String>) -> LmError {
        LmError::Remote {
            endpoint: self.endpoint.clone(),
            message: message.into(),
        }
    }

    fn call(&self, context: &[String]) -> Result<LmResponse, LmError> {
        let req = LmRequest {
            context: context.to_vec(),
        };
        let resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&req)
            .map_err(|e| self.error(e.to_string()))?;
        let body: LmResponse = resp
            .into_json()
            .map_err(|e| self.error(format!("malformed response: {e}")))?;
        if body.tokens.len() != body.logprobs.len() {
            return Err(self.error(format!(
                "malformed response: {} tokens but {} logprobs",
                body.tokens.len(),
                body.logprobs.len()
            )));
        }
        Ok(body)
    }

    fn to_dist(&self, resp: LmResponse) -> Result<TokenDist, LmError> {
        let mut probs = vec![0.0; self.vocab.len()];
        let mut seen = vec![false; self.vocab.len()];
        for (tok, lp) in resp.tokens.iter().zip(&resp.logprobs) {
            let id = self
                .vocab
                .id(tok)
                .ok_or_else(|| self.error(format!("token {tok:?} not in served vocabulary")))?;
            if std::mem::replace(&mut seen[id.index()], true) {
                return Err(self.error(format!("token {tok:?} listed twice")));
            }
            if lp.is_nan() || *lp > 0.0 {
                return Err(self.error(format!("invalid logprob {lp} for {tok:?}")));
            }
            probs[id.index()] = lp.exp();
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(self.error(format!("probabilities sum to {mass}")));
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        TokenDist::new(probs).map_err(|e| self.error(e.to_string()))
    }
}

impl LanguageModel for RemoteLm {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDist, LmError> {
        if let Some(bad) = context.iter().find(|t| t.index() >= self.vocab.len()) {
            return Err(LmError::TokenOutOfRange(bad.0));
        }
        let resp = self.call(&self.vocab.decode(context))?;
        self.to_dist(resp)
    }
}
