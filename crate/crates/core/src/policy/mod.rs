//! Generation backends.
//!
//! A backend turns a prompt into raw text plus optional per-token logprobs.
//! [`generate`] layers the dual-mode contract on top: in thinking mode the
//! reply is split into a reasoning trace and an answer, in non-thinking mode
//! only the answer is returned.

mod remote;
mod scripted;

pub use remote::{network_calls, RemoteBackend, RemoteConfig};
pub use scripted::{Exhaustion, ScriptEntry, ScriptedBackend};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Thinking,
    NonThinking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt: String,
    pub mode: Mode,
    pub temperature: f64,
    pub top_p: f64,
    /// Generation limit in whitespace tokens.
    pub max_units: usize,
    pub want_logprobs: bool,
    pub top_alternatives: usize,
    pub seed: Option<u64>,
}

impl GenRequest {
    /// Request with the default sampling settings (T = 0.6, top-p = 0.95).
    pub fn new(prompt: impl Into<String>, mode: Mode) -> Self {
        GenRequest {
            prompt: prompt.into(),
            mode,
            temperature: 0.6,
            top_p: 0.95,
            max_units: 1024,
            want_logprobs: false,
            top_alternatives: 20,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::InvalidRequest(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub token: String,
    pub logprob: f64,
    #[serde(default)]
    pub alternatives: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finish {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenResponse {
    pub answer: String,
    pub reasoning: Option<String>,
    /// Tokens of the whole raw completion, trace included.
    pub tokens: Option<Vec<TokenLogProbs>>,
    /// Byte offset of `answer` within the raw completion text.
    pub answer_offset: usize,
    pub finish: Finish,
}

impl GenResponse {
    fn error() -> Self {
        GenResponse {
            answer: String::new(),
            reasoning: None,
            tokens: None,
            answer_offset: 0,
            finish: Finish::Error,
        }
    }

    pub fn is_error(&self) -> bool {
        self.finish == Finish::Error
    }
}

/// Raw backend output before trace splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub tokens: Option<Vec<TokenLogProbs>>,
    pub truncated: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend reply: {0}")]
    Malformed(String),
    #[error("script exhausted after {0} replies")]
    Exhausted(usize),
    #[error("scripted failure")]
    Scripted,
    #[error("cannot load script {path}: {reason}")]
    Script { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDelimiters {
    pub open: String,
    pub close: String,
}

impl Default for TraceDelimiters {
    fn default() -> Self {
        TraceDelimiters {
            open: "<think>".into(),
            close: "</think>".into(),
        }
    }
}

pub trait GenerationBackend: Send + Sync {
    fn complete(&self, req: &GenRequest) -> Result<RawCompletion, BackendError>;

    fn delimiters(&self) -> TraceDelimiters {
        TraceDelimiters::default()
    }
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for &B {
    fn complete(&self, req: &GenRequest) -> Result<RawCompletion, BackendError> {
        (**self).complete(req)
    }

    fn delimiters(&self) -> TraceDelimiters {
        (**self).delimiters()
    }
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for std::sync::Arc<B> {
    fn complete(&self, req: &GenRequest) -> Result<RawCompletion, BackendError> {
        (**self).complete(req)
    }

    fn delimiters(&self) -> TraceDelimiters {
        (**self).delimiters()
    }
}

/// Splits at the last closing delimiter. The trace loses a leading opening
/// delimiter; both parts are trimmed. Without a closer the whole text is the
/// answer and the trace is empty.
pub fn split_reasoning(raw: &str, delims: &TraceDelimiters) -> (String, String) {
    split_with_offset(raw, delims).0
}

fn split_with_offset(raw: &str, delims: &TraceDelimiters) -> ((String, String), usize) {
    let Some(pos) = raw.rfind(&delims.close) else {
        return ((String::new(), raw.to_string()), 0);
    };
    let before = raw[..pos].trim_start();
    let before = before.strip_prefix(delims.open.as_str()).unwrap_or(before);
    let after = &raw[pos + delims.close.len()..];
    let answer = after.trim();
    let offset = pos + delims.close.len() + (after.len() - after.trim_start().len());
    ((before.trim().to_string(), answer.to_string()), offset)
}

/// Runs one request against `backend` and applies the dual-mode contract.
/// Transport failures surface as `finish = Error` with an empty answer.
pub fn generate(req: &GenRequest, backend: &dyn GenerationBackend) -> GenResponse {
    if let Err(err) = req.validate() {
        tracing::warn!(%err, "rejected generation request");
        return GenResponse::error();
    }
    let raw = match backend.complete(req) {
        Ok(raw) => raw,
        Err(err) => {
            tracing::warn!(%err, "generation failed");
            return GenResponse::error();
        }
    };
    let ((trace, answer), answer_offset) = split_with_offset(&raw.text, &backend.delimiters());
    let reasoning = match req.mode {
        Mode::Thinking if !trace.is_empty() => Some(trace),
        _ => None,
    };
    let tokens = if req.want_logprobs {
        raw.tokens.map(|toks| {
            toks.into_iter()
                .map(|mut t| {
                    t.alternatives.truncate(req.top_alternatives);
                    t
                })
                .collect()
        })
    } else {
        None
    };
    GenResponse {
        answer,
        reasoning,
        tokens,
        answer_offset,
        finish: if raw.truncated {
            Finish::Length
        } else {
            Finish::Stop
        },
    }
}

/// Tokens of `tokens` whose text overlaps the byte range `[start, end)` of the
/// concatenated token text.
pub fn tokens_in_range(tokens: &[TokenLogProbs], start: usize, end: usize) -> &[TokenLogProbs] {
    let mut offset = 0;
    let mut first = None;
    let mut last = 0;
    for (i, t) in tokens.iter().enumerate() {
        let t_end = offset + t.token.len();
        if t_end > start && offset < end {
            first.get_or_insert(i);
            last = i + 1;
        }
        offset = t_end;
    }
    match first {
        Some(f) => &tokens[f..last],
        None => &[],
    }
}
