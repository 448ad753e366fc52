//! Tiered reward: cheap static checks gate test execution.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::apply::{apply_patch, apply_relaxed};
use super::diff::{FileOp, Patch};
use super::runner::{patch_digest, Outcome, RunRequest, SuiteSpec, TestRunner, TestSuiteResult};
use super::syntax::check_syntax;
use super::HarnessError;
use crate::ingest::{Language, RepoSnapshot};
use crate::{python, text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Invalid,
    SyntaxOnly,
    Applies,
    FullPass,
}

pub const SYNTAX_ONLY_REWARD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub tier: Tier,
    pub pass_fraction: Option<f64>,
    pub reward: f64,
}

impl RewardBreakdown {
    pub fn invalid() -> Self {
        RewardBreakdown {
            tier: Tier::Invalid,
            pass_fraction: None,
            reward: 0.0,
        }
    }

    pub fn syntax_only() -> Self {
        RewardBreakdown {
            tier: Tier::SyntaxOnly,
            pass_fraction: None,
            reward: SYNTAX_ONLY_REWARD,
        }
    }

    /// Reward for a patch that applied and ran `passed` of `total` tests.
    pub fn from_tests(passed: usize, total: usize) -> Self {
        let f = if total == 0 {
            0.0
        } else {
            passed as f64 / total as f64
        };
        if total > 0 && passed == total {
            RewardBreakdown {
                tier: Tier::FullPass,
                pass_fraction: Some(1.0),
                reward: 1.0,
            }
        } else {
            RewardBreakdown {
                tier: Tier::Applies,
                pass_fraction: Some(f),
                reward: 0.5 + 0.5 * f,
            }
        }
    }
}

/// Full outcome of scoring one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub breakdown: RewardBreakdown,
    pub applied: bool,
    pub result: Option<TestSuiteResult>,
    /// Human-readable findings in the order they were produced: parse and
    /// apply errors, syntax faults, failing tests.
    pub diagnostics: Vec<String>,
}

impl Evaluation {
    fn stop(breakdown: RewardBreakdown, applied: bool, diagnostics: Vec<String>) -> Self {
        Evaluation {
            breakdown,
            applied,
            result: None,
            diagnostics,
        }
    }

    pub fn reward(&self) -> f64 {
        self.breakdown.reward
    }

    pub fn tier(&self) -> Tier {
        self.breakdown.tier
    }
}

/// Anything that can score a candidate diff.
pub trait PatchEvaluator: Send + Sync {
    fn evaluate(&self, diff_text: &str) -> Evaluation;
}

/// Whether the code a non-applying patch proposes is well-formed on its own.
/// Hunks are first placed wherever their context matches; if that fails too,
/// each hunk's new side is parsed as a standalone fragment.
fn raw_syntax_valid(snapshot: &RepoSnapshot, patch: &Patch) -> bool {
    if let Ok(placed) = apply_relaxed(snapshot, patch) {
        return check_syntax(&placed, Some(&patch.changed_paths())).valid;
    }
    patch
        .files
        .iter()
        .filter(|f| f.op != FileOp::Delete && Language::from_path(&f.path) == Language::Python)
        .flat_map(|f| f.hunks.iter())
        .all(|h| {
            let body: String = h.new_side().map(|l| format!("{}\n", l.text)).collect();
            python::first_syntax_fault(&text::dedent(&body)).is_none()
        })
}

/// Outcome of the checks that run before any test.
#[derive(Debug, Clone)]
pub enum StaticCheck {
    /// Unparseable, empty, or malformed code: tier invalid.
    Rejected {
        applied: bool,
        diagnostics: Vec<String>,
    },
    /// Well-formed code that does not apply: tier syntax_only.
    Conflict { diagnostics: Vec<String> },
    /// Applies cleanly and every changed Python file parses.
    Admitted { patch: Patch, patched: RepoSnapshot },
}

/// Parses, applies and syntax-checks `diff_text` without running tests.
/// A patch that applies is judged on the patched files; one that does not is
/// judged on the code it proposes.
pub fn static_check(snapshot: &RepoSnapshot, diff_text: &str) -> StaticCheck {
    let patch = match Patch::parse(diff_text) {
        Ok(p) if !p.is_empty() => p,
        Ok(_) => {
            return StaticCheck::Rejected {
                applied: false,
                diagnostics: vec!["patch has no hunks".into()],
            }
        }
        Err(e) => {
            return StaticCheck::Rejected {
                applied: false,
                diagnostics: vec![format!("malformed diff: {e}")],
            }
        }
    };
    let patched = match apply_patch(snapshot, &patch) {
        Ok(s) => s,
        Err(e) => {
            let diagnostics = vec![format!("patch does not apply: {e}")];
            return if raw_syntax_valid(snapshot, &patch) {
                StaticCheck::Conflict { diagnostics }
            } else {
                StaticCheck::Rejected {
                    applied: false,
                    diagnostics,
                }
            };
        }
    };
    let syntax = check_syntax(&patched, Some(&patch.changed_paths()));
    if !syntax.valid {
        return StaticCheck::Rejected {
            applied: true,
            diagnostics: syntax
                .diagnostics
                .iter()
                .map(|d| {
                    format!(
                        "syntax error in {} at line {}: {}",
                        d.file, d.line, d.message
                    )
                })
                .collect(),
        };
    }
    StaticCheck::Admitted { patch, patched }
}

/// Scores `diff_text` against `snapshot`:
/// unparseable or empty → invalid; applies with clean syntax → tests decide
/// between `applies` and `full_pass`; applies with broken syntax → invalid;
/// does not apply → `syntax_only` when the proposed code parses, else invalid.
pub fn tiered_evaluate(
    snapshot: &RepoSnapshot,
    diff_text: &str,
    suite: &SuiteSpec,
    runner: &dyn TestRunner,
    timeout: Duration,
) -> Evaluation {
    let (patch, patched) = match static_check(snapshot, diff_text) {
        StaticCheck::Rejected {
            applied,
            diagnostics,
        } => return Evaluation::stop(RewardBreakdown::invalid(), applied, diagnostics),
        StaticCheck::Conflict { diagnostics } => {
            return Evaluation::stop(RewardBreakdown::syntax_only(), false, diagnostics)
        }
        StaticCheck::Admitted { patch, patched } => (patch, patched),
    };
    let req = RunRequest {
        snapshot: &patched,
        patch: &patch,
        suite,
        timeout,
    };
    match runner.run(&req) {
        Ok(result) => {
            let breakdown = RewardBreakdown::from_tests(result.passed(), result.total());
            let diagnostics = result
                .outcomes
                .iter()
                .filter(|(_, o)| **o != Outcome::Pass)
                .map(|(id, o)| {
                    format!(
                        "test {id}: {}",
                        if *o == Outcome::Fail {
                            "failed"
                        } else {
                            "error"
                        }
                    )
                })
                .collect();
            Evaluation {
                breakdown,
                applied: true,
                result: Some(result),
                diagnostics,
            }
        }
        Err(e) => Evaluation::stop(
            RewardBreakdown::from_tests(0, 0),
            true,
            vec![format!("test run failed: {e}")],
        ),
    }
}

/// True iff every fail-to-pass and every pass-to-pass test passes in `after`.
/// All ids must be present in both results.
pub fn resolve_check(
    before: &TestSuiteResult,
    after: &TestSuiteResult,
    f2p: &[String],
    p2p: &[String],
) -> Result<bool, HarnessError> {
    for id in f2p.iter().chain(p2p) {
        if before.outcome(id).is_none() || after.outcome(id).is_none() {
            return Err(HarnessError::UnknownTest(id.clone()));
        }
    }
    Ok(f2p
        .iter()
        .chain(p2p)
        .all(|id| after.outcome(id) == Some(Outcome::Pass)))
}

/// One instance's evaluation context. Results are memoized per patch digest.
pub struct Harness {
    pub snapshot: RepoSnapshot,
    pub suite: SuiteSpec,
    pub runner: Arc<dyn TestRunner>,
    pub timeout: Duration,
    cache: Mutex<HashMap<String, Evaluation>>,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

impl Harness {
    pub fn new(snapshot: RepoSnapshot, suite: SuiteSpec, runner: Arc<dyn TestRunner>) -> Self {
        Harness {
            snapshot,
            suite,
            runner,
            timeout: DEFAULT_TIMEOUT,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Runs the suite against the unpatched snapshot.
    pub fn baseline(&self) -> Result<TestSuiteResult, HarnessError> {
        self.runner.run(&RunRequest {
            snapshot: &self.snapshot,
            patch: &Patch::empty(),
            suite: &self.suite,
            timeout: self.timeout,
        })
    }
}

impl PatchEvaluator for Harness {
    fn evaluate(&self, diff_text: &str) -> Evaluation {
        let key = match Patch::parse(diff_text) {
            Ok(p) => patch_digest(&p),
            Err(_) => format!("raw:{}", text::short_digest(diff_text, 16)),
        };
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return hit.clone();
        }
        let eval = tiered_evaluate(
            &self.snapshot,
            diff_text,
            &self.suite,
            self.runner.as_ref(),
            self.timeout,
        );
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, eval.clone());
        eval
    }
}
