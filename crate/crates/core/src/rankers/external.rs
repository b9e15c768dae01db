//! Adapter for neural rankers served over HTTP.
//!
//! `POST {"query": ..., "facet": ..., "candidates": [...]}` and expect
//! `{"scores": [...]}` with one finite score per candidate, higher is better.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RankError, RankedList};

/// Consulted when no scorer endpoint is given on the command line.
pub const SCORER_ENDPOINT_ENV: &str = "CLARQ_SCORER_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub query: String,
    pub facet: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug)]
pub struct ExternalScorer {
    endpoint: String,
    agent: ureq::Agent,
    /// Held across a request unless the endpoint accepts concurrent calls.
    serial: Option<Mutex<()>>,
}

impl ExternalScorer {
    pub fn new(endpoint: &str, concurrent_safe: bool) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
            serial: (!concurrent_safe).then(|| Mutex::new(())),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn error(&self, message: impl Into<String>) -> RankError {
        RankError::Remote {
            endpoint: self.endpoint.clone(),
            message: message.into(),
        }
    }

    pub fn score(
        &self,
        query: &str,
        facet: &str,
        candidates: &[String],
    ) -> Result<Vec<f64>, RankError> {
        let req = ScoreRequest {
            query: query.to_string(),
            facet: facet.to_string(),
            candidates: candidates.to_vec(),
        };
        let _guard = self
            .serial
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        let resp: ScoreResponse = self
            .agent
            .post(&self.endpoint)
            .send_json(&req)
            .map_err(|e| self.error(e.to_string()))?
            .into_json()
            .map_err(|e| self.error(format!("malformed response: {e}")))?;
        if resp.scores.len() != candidates.len() {
            return Err(self.error(format!(
                "malformed response: {} scores for {} candidates",
                resp.scores.len(),
                candidates.len()
            )));
        }
        if let Some(s) = resp.scores.iter().find(|s| !s.is_finite()) {
            return Err(self.error(format!("malformed response: score {s}")));
        }
        Ok(resp.scores)
    }
}

pub fn rank_external(
    scorer: &ExternalScorer,
    query: &str,
    facet: &str,
    candidates: &[String],
) -> Result<RankedList, RankError> {
    if candidates.is_empty() {
        return Err(RankError::NoCandidates);
    }
    let scores = scorer.score(query, facet, candidates)?;
    Ok(RankedList::from_scores(&scores))
}
