use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use patchtree_core::harness::Tier;
use patchtree_core::localize::EditLocation;
use patchtree_core::metrics::CodeBleu;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const INVOCATION: &str = "invocation.json";
pub const LOCALIZATION: &str = "localization.jsonl";
pub const LOCATIONS: &str = "locations.jsonl";
pub const SEARCH_TRACE: &str = "search_trace.jsonl";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const REFINE_TRACE: &str = "refine_trace.jsonl";
pub const REFINED_PREDICTIONS: &str = "predictions.refined.jsonl";
pub const EVALUATION: &str = "evaluation.jsonl";

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f =
        std::fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads every well-formed record; malformed lines are logged and skipped.
/// Returns the records and the number of skipped lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, usize)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) => {
                tracing::warn!("{}: skipping line {}: {e}", path.display(), i + 1);
                skipped += 1;
            }
        }
    }
    Ok((out, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRef {
    pub path: String,
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationsRecord {
    pub instance_id: String,
    pub files: Vec<String>,
    pub functions: Vec<FunctionRef>,
    pub locations: Vec<EditLocation>,
    pub fallback: bool,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub model_name_or_path: String,
    pub model_patch: String,
    pub metadata: PredictionMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMeta {
    /// `search`, `direct` or `refine`.
    pub stage: String,
    pub tier: Tier,
    pub reward: f64,
    /// Estimated probability that the patch is correct.
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance_id: String,
    pub patch_present: bool,
    pub applied: bool,
    pub resolved: bool,
    pub tier: Tier,
    pub reward: f64,
    pub confidence: f64,
    pub predicted_files: Vec<String>,
    pub gold_files: Vec<String>,
    /// Loc@k per cutoff; absent without gold files.
    pub loc: BTreeMap<String, bool>,
    pub codebleu: Option<CodeBleu>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub hits: usize,
    pub total: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub instances: usize,
    pub resolve: RateRecord,
    pub apply: RateRecord,
    pub loc_at_k: BTreeMap<String, f64>,
    pub codebleu: Option<f64>,
    pub ece: Option<f64>,
    pub search: bool,
    pub refine: bool,
    pub thinking: bool,
    pub lexical_only: bool,
}

/// A line of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum EvaluationRecord {
    Instance(InstanceReport),
    Aggregate(Aggregate),
}
