use serde::{Deserialize, Serialize};

use crate::harness::{
    static_check, Evaluation, Harness, PatchEvaluator, RewardBreakdown, StaticCheck,
};

/// Last gate a candidate reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    /// Rejected by the syntax check (reward 0).
    Syntax,
    /// Well-formed but does not apply (reward 0.2).
    Apply,
    /// Passed both static gates and ran the tests.
    Tests,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredCandidate {
    pub patch: String,
    pub stage: FilterStage,
    pub evaluation: Evaluation,
}

/// Scores each candidate, running tests only for those that parse, apply and
/// leave syntactically valid files behind.
pub fn tiered_filter(candidates: &[String], harness: &Harness) -> Vec<FilteredCandidate> {
    candidates
        .iter()
        .map(|patch| {
            let (stage, evaluation) = match static_check(&harness.snapshot, patch) {
                StaticCheck::Rejected {
                    applied,
                    diagnostics,
                } => (
                    FilterStage::Syntax,
                    Evaluation {
                        breakdown: RewardBreakdown::invalid(),
                        applied,
                        result: None,
                        diagnostics,
                    },
                ),
                StaticCheck::Conflict { diagnostics } => (
                    FilterStage::Apply,
                    Evaluation {
                        breakdown: RewardBreakdown::syntax_only(),
                        applied: false,
                        result: None,
                        diagnostics,
                    },
                ),
                StaticCheck::Admitted { .. } => (FilterStage::Tests, harness.evaluate(patch)),
            };
            FilteredCandidate {
                patch: patch.clone(),
                stage,
                evaluation,
            }
        })
        .collect()
}
