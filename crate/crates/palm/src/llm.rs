//! Chat-completions client used as a generation backend.

use std::time::Duration;

use palm_core::driver::{Backend, BackendError, GenRequest, GenResponse};
use palm_core::Analysis;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub const API_KEY_VAR: &str = "PALM_API_KEY";

/// Longest wait honored from a `Retry-After` header.
const MAX_RETRY_WAIT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LlmConfig {
    /// Base URL up to and excluding `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Extra request fields such as `temperature`, passed through unchanged.
    pub params: Map<String, Value>,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            params: Map::new(),
            timeout_secs: 120,
        }
    }
}

pub struct LlmBackend {
    config: LlmConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl LlmBackend {
    /// The credential is read from `PALM_API_KEY`; without it requests are
    /// sent unauthenticated, which suits local endpoints.
    pub fn from_env(config: LlmConfig) -> LlmBackend {
        LlmBackend::new(config, std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()))
    }

    pub fn new(config: LlmConfig, api_key: Option<String>) -> LlmBackend {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build()
            .into();
        LlmBackend { config, api_key, agent }
    }

    fn body(&self, prompt: &str) -> Value {
        let mut body = self.config.params.clone();
        body.insert("model".into(), self.config.model.clone().into());
        body.insert("messages".into(), json!([{ "role": "user", "content": prompt }]));
        Value::Object(body)
    }

    fn send(&self, body: &Value) -> Result<Attempt, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 400 {
            let retry = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .map(|s| Duration::from_secs_f64(s.max(0.0)).min(MAX_RETRY_WAIT));
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Ok(Attempt::Failed { status, text, retry });
        }
        let doc: Value = resp.body_mut().read_json().map_err(|e| BackendError::Unavailable(format!("bad response body: {e}")))?;
        Ok(Attempt::Done(doc))
    }
}

enum Attempt {
    Done(Value),
    Failed { status: u16, text: String, retry: Option<Duration> },
}

/// Text content of the first choice.
pub fn reply_text(doc: &Value) -> Option<String> {
    let content = &doc["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Some(s.clone()),
        // Some servers return a list of content parts.
        Value::Array(parts) => Some(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("")),
        _ => None,
    }
}

impl Backend for LlmBackend {
    fn name(&self) -> String {
        format!("llm:{}", self.config.model)
    }

    fn generate(&mut self, _analysis: &Analysis, request: &GenRequest) -> Result<GenResponse, BackendError> {
        let body = self.body(&request.prompt);
        let mut retried = false;
        loop {
            match self.send(&body)? {
                Attempt::Done(doc) => {
                    let text = reply_text(&doc)
                        .ok_or_else(|| BackendError::Unavailable("response has no message content".into()))?;
                    return Ok(GenResponse::Reply(text));
                }
                Attempt::Failed { retry: Some(wait), .. } if !retried => {
                    log::warn!("endpoint asked to retry after {wait:?}");
                    std::thread::sleep(wait);
                    retried = true;
                }
                Attempt::Failed { status, text, .. } => {
                    let snippet: String = text.chars().take(200).collect();
                    return Err(BackendError::Unavailable(format!("HTTP {status}: {snippet}")));
                }
            }
        }
    }
}
