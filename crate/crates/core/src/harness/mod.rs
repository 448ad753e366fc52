//! Patch application, syntax validation, test execution and the tiered reward.

mod apply;
pub mod diff;
mod evaluate;
mod runner;
mod syntax;

pub use apply::{apply_patch, ApplyError};
pub use diff::{extract_diff, DiffError, FileDiff, FileOp, Hunk, HunkLine, LineKind, Patch};
pub use evaluate::{
    resolve_check, static_check, tiered_evaluate, Evaluation, Harness, PatchEvaluator,
    RewardBreakdown, StaticCheck, Tier, DEFAULT_TIMEOUT, SYNTAX_ONLY_REWARD,
};
pub use runner::{
    patch_digest, spawned_processes, Outcome, RunRequest, SimRecord, SimulatedRunner,
    SubprocessRunner, SuiteSpec, TestRunner, TestSuiteResult,
};
pub use syntax::{check_syntax, SyntaxDiagnostic, SyntaxReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("suite names no tests")]
    EmptySuite,
    #[error("test id {0} is not part of the suite result")]
    UnknownTest(String),
    #[error("could not prepare working copy: {0}")]
    Workspace(String),
    #[error("bad simulator script {path}: {reason}")]
    Script { path: String, reason: String },
}
