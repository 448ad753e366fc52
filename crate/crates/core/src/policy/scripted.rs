use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    BackendError, GenRequest, GenerationBackend, Mode, RawCompletion, TokenLogProbs,
    TraceDelimiters,
};

/// One scripted reply. In thinking mode a `trace` is emitted wrapped in the
/// trace delimiters ahead of `reply`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<TokenLogProbs>>,
    /// Simulates a transport failure for this call.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub error: bool,
}

impl ScriptEntry {
    pub fn reply(text: impl Into<String>) -> Self {
        ScriptEntry {
            reply: text.into(),
            trace: None,
            logprobs: None,
            error: false,
        }
    }

    pub fn with_trace(mut self, trace: impl Into<String>) -> Self {
        self.trace = Some(trace.into());
        self
    }

    pub fn with_logprobs(mut self, tokens: Vec<TokenLogProbs>) -> Self {
        self.logprobs = Some(tokens);
        self
    }

    pub fn failure() -> Self {
        ScriptEntry {
            reply: String::new(),
            trace: None,
            logprobs: None,
            error: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    #[default]
    Wrap,
    Error,
}

/// Replays a fixed list of replies in order, ignoring the prompt.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    exhaustion: Exhaustion,
    delimiters: TraceDelimiters,
    cursor: Mutex<usize>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>, exhaustion: Exhaustion) -> Result<Self, BackendError> {
        if entries.is_empty() {
            return Err(BackendError::Script {
                path: "<inline>".into(),
                reason: "script is empty".into(),
            });
        }
        Ok(ScriptedBackend {
            entries,
            exhaustion,
            delimiters: TraceDelimiters::default(),
            cursor: Mutex::new(0),
            calls: AtomicUsize::new(0),
        })
    }

    pub fn with_delimiters(mut self, delimiters: TraceDelimiters) -> Self {
        self.delimiters = delimiters;
        self
    }

    /// Loads a line-delimited JSON script; blank lines are ignored.
    pub fn load(path: &Path, exhaustion: Exhaustion) -> Result<Self, BackendError> {
        let err = |reason: String| BackendError::Script {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry =
                serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(err("script is empty".into()));
        }
        Self::new(entries, exhaustion)
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GenerationBackend for ScriptedBackend {
    fn complete(&self, req: &GenRequest) -> Result<RawCompletion, BackendError> {
        let entry = {
            let mut cursor = self.cursor.lock().expect("script cursor poisoned");
            let idx = match self.exhaustion {
                Exhaustion::Wrap => *cursor % self.entries.len(),
                Exhaustion::Error if *cursor >= self.entries.len() => {
                    return Err(BackendError::Exhausted(self.entries.len()))
                }
                Exhaustion::Error => *cursor,
            };
            *cursor += 1;
            self.entries[idx].clone()
        };
        self.calls.fetch_add(1, Ordering::SeqCst);
        if entry.error {
            return Err(BackendError::Scripted);
        }
        let text = match (&entry.trace, req.mode) {
            (Some(trace), Mode::Thinking) => format!(
                "{}{}{}{}",
                self.delimiters.open, trace, self.delimiters.close, entry.reply
            ),
            _ => entry.reply.clone(),
        };
        Ok(RawCompletion {
            text,
            tokens: entry.logprobs,
            truncated: false,
        })
    }

    fn delimiters(&self) -> TraceDelimiters {
        self.delimiters.clone()
    }
}
