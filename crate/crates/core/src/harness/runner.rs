//! Test execution: a subprocess runner over a temporary working copy and a
//! scripted simulator.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;
use walkdir::WalkDir;

use super::diff::{FileOp, Patch};
use super::HarnessError;
use crate::ingest::RepoSnapshot;
use crate::text;

static SPAWNED: AtomicU64 = AtomicU64::new(0);

/// Processes started by any [`SubprocessRunner`] in this process.
pub fn spawned_processes() -> u64 {
    SPAWNED.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TestSuiteResult {
    pub outcomes: BTreeMap<String, Outcome>,
    /// Wall-clock seconds per test; zero for simulated runs.
    pub durations: BTreeMap<String, f64>,
}

impl TestSuiteResult {
    pub fn total(&self) -> usize {
        self.outcomes.len()
    }

    pub fn passed(&self) -> usize {
        self.outcomes
            .values()
            .filter(|o| **o == Outcome::Pass)
            .count()
    }

    pub fn passing(&self) -> impl Iterator<Item = &str> {
        self.outcomes
            .iter()
            .filter(|(_, o)| **o == Outcome::Pass)
            .map(|(id, _)| id.as_str())
    }

    pub fn pass_fraction(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.passed() as f64 / self.total() as f64)
    }

    pub fn all_pass(&self) -> bool {
        self.total() > 0 && self.passed() == self.total()
    }

    pub fn outcome(&self, id: &str) -> Option<Outcome> {
        self.outcomes.get(id).copied()
    }
}

/// Tests to run for an instance and how its fail-to-pass / pass-to-pass
/// partition is defined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SuiteSpec {
    /// Test ids making up `T`. Empty means the union of both partitions.
    #[serde(default)]
    pub tests: Vec<String>,
    #[serde(default)]
    pub fail_to_pass: Vec<String>,
    #[serde(default)]
    pub pass_to_pass: Vec<String>,
    /// Shell command template for the subprocess runner; `{test}` is replaced
    /// by the test id.
    #[serde(default)]
    pub command: Option<String>,
}

impl SuiteSpec {
    pub fn new(fail_to_pass: Vec<String>, pass_to_pass: Vec<String>) -> Self {
        SuiteSpec {
            tests: Vec::new(),
            fail_to_pass,
            pass_to_pass,
            command: None,
        }
    }

    /// The effective test set, in order and without duplicates.
    pub fn test_ids(&self) -> Vec<String> {
        let source: Vec<&String> = if self.tests.is_empty() {
            self.fail_to_pass.iter().chain(&self.pass_to_pass).collect()
        } else {
            self.tests.iter().collect()
        };
        let mut seen = std::collections::BTreeSet::new();
        source
            .into_iter()
            .filter(|t| seen.insert(t.as_str()))
            .cloned()
            .collect()
    }
}

/// Everything a runner may look at for one execution.
#[derive(Debug, Clone, Copy)]
pub struct RunRequest<'a> {
    /// Repository state after the candidate patch was applied.
    pub snapshot: &'a RepoSnapshot,
    pub patch: &'a Patch,
    pub suite: &'a SuiteSpec,
    pub timeout: Duration,
}

pub trait TestRunner: Send + Sync {
    fn run(&self, req: &RunRequest<'_>) -> Result<TestSuiteResult, HarnessError>;
}

/// Canonical identity of a patch for scripted outcomes.
pub fn patch_digest(patch: &Patch) -> String {
    text::short_digest(&patch.render(), 16)
}

/// One row of a simulator script. `patch` is a digest from [`patch_digest`]
/// or `"*"` for any patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRecord {
    pub patch: String,
    pub test: String,
    pub outcome: Outcome,
}

/// Returns scripted outcomes without spawning anything. A digest-specific
/// record wins over a wildcard; tests with no record come back as errors.
#[derive(Debug, Default)]
pub struct SimulatedRunner {
    table: BTreeMap<(String, String), Outcome>,
    runs: AtomicUsize,
}

impl SimulatedRunner {
    pub fn new(records: impl IntoIterator<Item = SimRecord>) -> Self {
        SimulatedRunner {
            table: records
                .into_iter()
                .map(|r| ((r.patch, r.test), r.outcome))
                .collect(),
            runs: AtomicUsize::new(0),
        }
    }

    /// Loads a line-delimited JSON script of [`SimRecord`]s.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let err = |reason: String| HarnessError::Script {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records
                .push(serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?);
        }
        Ok(Self::new(records))
    }

    pub fn runs(&self) -> usize {
        self.runs.load(Ordering::SeqCst)
    }
}

impl TestRunner for SimulatedRunner {
    fn run(&self, req: &RunRequest<'_>) -> Result<TestSuiteResult, HarnessError> {
        let ids = req.suite.test_ids();
        if ids.is_empty() {
            return Err(HarnessError::EmptySuite);
        }
        self.runs.fetch_add(1, Ordering::SeqCst);
        let digest = patch_digest(req.patch);
        let mut result = TestSuiteResult::default();
        for id in ids {
            let outcome = self
                .table
                .get(&(digest.clone(), id.clone()))
                .or_else(|| self.table.get(&("*".to_string(), id.clone())))
                .copied()
                .unwrap_or(Outcome::Error);
            result.durations.insert(id.clone(), 0.0);
            result.outcomes.insert(id, outcome);
        }
        Ok(result)
    }
}

/// Runs `command` (with `{test}` substituted) through `sh -c` once per test
/// inside a fresh copy of the repository. Exit status 0 is a pass, 1 a
/// failure, anything else an error. The timeout covers the whole suite;
/// tests left when it expires are reported as errors.
#[derive(Debug, Clone)]
pub struct SubprocessRunner {
    pub command: String,
}

impl SubprocessRunner {
    pub fn new(command: impl Into<String>) -> Self {
        SubprocessRunner {
            command: command.into(),
        }
    }

    fn prepare(&self, req: &RunRequest<'_>, dest: &Path) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Workspace(e.to_string());
        let root = &req.snapshot.root;
        if root.is_dir() {
            for entry in WalkDir::new(root)
                .into_iter()
                .filter_entry(|e| e.file_name() != ".git")
            {
                let entry = entry.map_err(|e| HarnessError::Workspace(e.to_string()))?;
                let rel = entry
                    .path()
                    .strip_prefix(root)
                    .expect("walk stays under root");
                let target = dest.join(rel);
                if entry.file_type().is_dir() {
                    std::fs::create_dir_all(&target).map_err(io)?;
                } else if entry.file_type().is_file() {
                    std::fs::copy(entry.path(), &target).map_err(io)?;
                }
            }
        }
        for file in req.snapshot.files() {
            let target = dest.join(&file.path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            std::fs::write(&target, &file.content).map_err(io)?;
        }
        for diff in &req.patch.files {
            if diff.op == FileOp::Delete && !req.snapshot.contains(&diff.path) {
                let target = dest.join(&diff.path);
                if target.exists() {
                    std::fs::remove_file(&target).map_err(io)?;
                }
            }
        }
        Ok(())
    }
}

impl TestRunner for SubprocessRunner {
    fn run(&self, req: &RunRequest<'_>) -> Result<TestSuiteResult, HarnessError> {
        let ids = req.suite.test_ids();
        if ids.is_empty() {
            return Err(HarnessError::EmptySuite);
        }
        let command = req.suite.command.as_deref().unwrap_or(&self.command);
        let work = tempfile::tempdir().map_err(|e| HarnessError::Workspace(e.to_string()))?;
        self.prepare(req, work.path())?;
        let deadline = Instant::now() + req.timeout;
        let mut result = TestSuiteResult::default();
        for id in ids {
            let started = Instant::now();
            let remaining = deadline.saturating_duration_since(started);
            let outcome = if remaining.is_zero() {
                Outcome::Error
            } else {
                SPAWNED.fetch_add(1, Ordering::SeqCst);
                let child = Command::new("sh")
                    .arg("-c")
                    .arg(command.replace("{test}", &id))
                    .current_dir(work.path())
                    .stdin(Stdio::null())
                    .stdout(Stdio::null())
                    .stderr(Stdio::null())
                    .spawn();
                match child {
                    Err(e) => {
                        tracing::warn!(test = %id, error = %e, "could not start test command");
                        Outcome::Error
                    }
                    Ok(mut child) => match child.wait_timeout(remaining) {
                        Ok(Some(status)) => match status.code() {
                            Some(0) => Outcome::Pass,
                            Some(1) => Outcome::Fail,
                            _ => Outcome::Error,
                        },
                        Ok(None) => {
                            let _ = child.kill();
                            let _ = child.wait();
                            Outcome::Error
                        }
                        Err(_) => Outcome::Error,
                    },
                }
            };
            result
                .durations
                .insert(id.clone(), started.elapsed().as_secs_f64());
            result.outcomes.insert(id, outcome);
        }
        Ok(result)
    }
}
