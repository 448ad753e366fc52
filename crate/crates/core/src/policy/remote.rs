use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    BackendError, GenRequest, GenerationBackend, Mode, RawCompletion, TokenLogProbs,
    TraceDelimiters,
};

static NETWORK_CALLS: AtomicU64 = AtomicU64::new(0);

/// HTTP requests issued by any [`RemoteBackend`] in this process.
pub fn network_calls() -> u64 {
    NETWORK_CALLS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    /// Base URL of an OpenAI-compatible completion server, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token, if any.
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    /// Appended to the prompt to switch the model's reasoning mode.
    pub thinking_suffix: String,
    pub non_thinking_suffix: String,
    pub delimiters: TraceDelimiters,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000".into(),
            model: "default".into(),
            token_env: None,
            timeout_secs: 120,
            retries: 2,
            thinking_suffix: " /think".into(),
            non_thinking_suffix: " /no_think".into(),
            delimiters: TraceDelimiters::default(),
        }
    }
}

/// Client for a completion server speaking the widely deployed
/// `/v1/completions` and `/v1/embeddings` JSON API.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    top_logprobs: Option<Vec<Option<BTreeMap<String, f64>>>>,
}

#[derive(Deserialize)]
struct EmbeddingBody {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let token = config
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(RemoteBackend {
            config,
            token,
            client,
        })
    }

    fn post(&self, route: &str, body: &serde_json::Value) -> Result<String, BackendError> {
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), route);
        let mut last = BackendError::Transport("no attempt made".into());
        for attempt in 0..=self.config.retries {
            NETWORK_CALLS.fetch_add(1, Ordering::SeqCst);
            let mut request = self.client.post(&url).json(body);
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp
                        .text()
                        .map_err(|e| BackendError::Transport(e.to_string()))?;
                    if status.is_success() {
                        return Ok(text);
                    }
                    last = BackendError::Status {
                        status: status.as_u16(),
                        body: text,
                    };
                    if status.is_client_error() {
                        break;
                    }
                }
                Err(e) => last = BackendError::Transport(e.to_string()),
            }
            tracing::warn!(attempt, url = %url, error = %last, "backend request failed");
        }
        Err(last)
    }

    /// Dense embedding of `text` from `/v1/embeddings`, not normalized.
    pub fn embed_raw(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let body = json!({ "model": self.config.model, "input": text });
        let reply = self.post("v1/embeddings", &body)?;
        let parsed: EmbeddingBody =
            serde_json::from_str(&reply).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::Malformed("no embedding returned".into()))
    }
}

impl GenerationBackend for RemoteBackend {
    fn complete(&self, req: &GenRequest) -> Result<RawCompletion, BackendError> {
        let suffix = match req.mode {
            Mode::Thinking => &self.config.thinking_suffix,
            Mode::NonThinking => &self.config.non_thinking_suffix,
        };
        let mut body = json!({
            "model": self.config.model,
            "prompt": format!("{}{}", req.prompt, suffix),
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_units,
        });
        if req.want_logprobs {
            body["logprobs"] = json!(req.top_alternatives);
        }
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        let reply = self.post("v1/completions", &body)?;
        let parsed: CompletionBody =
            serde_json::from_str(&reply).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Malformed("no choices".into()))?;
        let tokens = choice.logprobs.map(|lp| {
            let tops = lp.top_logprobs.unwrap_or_default();
            lp.tokens
                .into_iter()
                .enumerate()
                .map(|(i, token)| {
                    let mut alternatives: Vec<(String, f64)> = tops
                        .get(i)
                        .cloned()
                        .flatten()
                        .unwrap_or_default()
                        .into_iter()
                        .collect();
                    alternatives.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    TokenLogProbs {
                        logprob: lp
                            .token_logprobs
                            .get(i)
                            .copied()
                            .flatten()
                            .unwrap_or(0.0)
                            .min(0.0),
                        token,
                        alternatives,
                    }
                })
                .collect()
        });
        Ok(RawCompletion {
            text: choice.text,
            tokens,
            truncated: choice.finish_reason.as_deref() == Some("length"),
        })
    }

    fn delimiters(&self) -> TraceDelimiters {
        self.config.delimiters.clone()
    }
}
