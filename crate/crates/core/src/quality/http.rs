//! JSON-over-HTTP scorer client.
//!
//! Request body: `{"task": "...", "text": "...", "version": 1, "prompt": "..."}`.
//! The response carries either `{"q": float}` (used as-is) or
//! `{"logits": {"yes": float, "no": float, ...}}`.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreWireRequest {
    pub task: String,
    pub text: String,
    pub version: u32,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreWireResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<BTreeMap<String, f64>>,
}

impl ScoreWireResponse {
    pub fn into_response(self) -> Result<ScoreResponse, ScorerError> {
        match (self.q, self.logits) {
            (Some(q), _) => Ok(ScoreResponse::Q(q)),
            (None, Some(l)) => Ok(ScoreResponse::Logits(l)),
            (None, None) => Err(ScorerError::Fatal(
                "response has neither \"q\" nor \"logits\"".into(),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpScorer {
    url: String,
    agent: ureq::Agent,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpScorer {
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Scorer for HttpScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        let body = ScoreWireRequest {
            task: request.task.name().to_string(),
            text: request.doc.text.clone(),
            version: PROTOCOL_VERSION,
            prompt: request.prompt.clone(),
        };
        let resp = match self.agent.post(&self.url).send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let msg = format!("HTTP {code}: {}", r.into_string().unwrap_or_default());
                return Err(if code >= 500 || code == 429 {
                    ScorerError::Transient(msg)
                } else {
                    ScorerError::Fatal(msg)
                });
            }
            Err(e) => return Err(ScorerError::Transient(e.to_string())),
        };
        let wire: ScoreWireResponse = resp
            .into_json()
            .map_err(|e| ScorerError::Fatal(format!("bad response body: {e}")))?;
        wire.into_response()
    }
}
