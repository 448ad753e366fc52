//! Dataset-level metrics: Resolve Rate, Apply Rate, Loc@k and CodeBLEU.

mod codebleu;

pub use codebleu::{
    code_bleu, code_tokens, patch_new_code, CodeBleu, KEYWORD_WEIGHT, PYTHON_KEYWORDS,
};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::localize::loc_at_k;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no outcomes to aggregate")]
    Empty,
    #[error("instance {0} has an empty gold file set")]
    EmptyGold(String),
    #[error("instance {id}: {reason}")]
    Inconsistent { id: String, reason: &'static str },
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance_id: String,
    pub patch_present: bool,
    pub applied: bool,
    pub resolved: bool,
    pub predicted_files: Vec<String>,
    pub gold_files: BTreeSet<String>,
    #[serde(default)]
    pub candidate_patch: String,
    #[serde(default)]
    pub reference_patch: String,
}

impl InstanceOutcome {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |reason| MetricsError::Inconsistent {
            id: self.instance_id.clone(),
            reason,
        };
        if self.resolved && !self.applied {
            return Err(bad("resolved but not applied"));
        }
        if self.applied && !self.patch_present {
            return Err(bad("applied without a patch"));
        }
        Ok(())
    }
}

/// A count over a total, shown as a percentage with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
}

impl Rate {
    pub fn percent(&self) -> f64 {
        100.0 * self.hits as f64 / self.total as f64
    }

    /// Percentage rounded half away from zero to two decimals.
    pub fn rounded(&self) -> f64 {
        (self.percent() * 100.0).round() / 100.0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}%", self.rounded())
    }
}

fn rate(
    outcomes: &[InstanceOutcome],
    flag: impl Fn(&InstanceOutcome) -> bool,
) -> Result<Rate, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    for o in outcomes {
        o.validate()?;
    }
    Ok(Rate {
        hits: outcomes.iter().filter(|o| flag(o)).count(),
        total: outcomes.len(),
    })
}

pub fn resolve_rate(outcomes: &[InstanceOutcome]) -> Result<Rate, MetricsError> {
    rate(outcomes, |o| o.resolved)
}

pub fn apply_rate(outcomes: &[InstanceOutcome]) -> Result<Rate, MetricsError> {
    rate(outcomes, |o| o.applied)
}

/// Fraction of instances with a gold file among their top `k` predictions.
pub fn loc_at_k_rate(outcomes: &[InstanceOutcome], k: usize) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::Empty);
    }
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let mut hits = 0;
    for o in outcomes {
        match loc_at_k(&o.predicted_files, &o.gold_files, k) {
            Ok(true) => hits += 1,
            Ok(false) => {}
            Err(_) => return Err(MetricsError::EmptyGold(o.instance_id.clone())),
        }
    }
    Ok(hits as f64 / outcomes.len() as f64)
}
