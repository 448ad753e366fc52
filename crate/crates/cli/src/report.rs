use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use patchtree_core::metrics::{apply_rate, loc_at_k_rate, resolve_rate, InstanceOutcome};

use crate::artifacts::{read_jsonl, Aggregate, EvaluationRecord, InstanceReport, EVALUATION};
use crate::pipeline::outcome_of;

/// Summary of one run directory, recomputed from its per-instance records.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub instances: usize,
    pub skipped: usize,
    pub resolve: f64,
    pub apply: f64,
    pub loc: Vec<(usize, f64)>,
    pub codebleu: Option<f64>,
    pub ece: Option<f64>,
    pub toggles: Option<[bool; 4]>,
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn summarize(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(EVALUATION);
    if !path.exists() {
        bail!("no evaluation report at {}", path.display());
    }
    let (records, skipped) = read_jsonl::<EvaluationRecord>(&path)?;
    let mut lines: Vec<InstanceReport> = Vec::new();
    let mut aggregate: Option<Aggregate> = None;
    for r in records {
        match r {
            EvaluationRecord::Instance(i) => lines.push(i),
            EvaluationRecord::Aggregate(a) => aggregate = Some(a),
        }
    }
    if lines.is_empty() {
        bail!("{} has no readable instance records", path.display());
    }
    let outcomes: Vec<InstanceOutcome> = lines.iter().map(outcome_of).collect();
    let with_gold: Vec<InstanceOutcome> = outcomes
        .iter()
        .filter(|o| !o.gold_files.is_empty())
        .cloned()
        .collect();
    let cutoffs: BTreeSet<usize> = lines
        .iter()
        .flat_map(|l| l.loc.keys().filter_map(|k| k.parse().ok()))
        .collect();
    let mut loc = Vec::new();
    if !with_gold.is_empty() {
        for k in cutoffs {
            loc.push((k, loc_at_k_rate(&with_gold, k)?));
        }
    }
    let bleus: Vec<f64> = lines
        .iter()
        .filter_map(|l| l.codebleu.map(|c| c.score))
        .collect();
    Ok(RunSummary {
        name: run_name(dir),
        instances: lines.len(),
        skipped,
        resolve: resolve_rate(&outcomes)?.percent(),
        apply: apply_rate(&outcomes)?.percent(),
        loc,
        codebleu: (!bleus.is_empty()).then(|| bleus.iter().sum::<f64>() / bleus.len() as f64),
        ece: aggregate.as_ref().and_then(|a| a.ece),
        toggles: aggregate.map(|a| [a.search, a.refine, a.thinking, !a.lexical_only]),
    })
}

const TOGGLE_NAMES: [&str; 4] = ["search", "refine", "thinking", "dense retrieval"];

fn differences(reference: &RunSummary, run: &RunSummary) -> String {
    let (Some(a), Some(b)) = (reference.toggles, run.toggles) else {
        return String::new();
    };
    let diffs: Vec<String> = (0..4)
        .filter(|&i| a[i] != b[i])
        .map(|i| format!("{} {}", TOGGLE_NAMES[i], if b[i] { "on" } else { "off" }))
        .collect();
    diffs.join(", ")
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

/// Table of Resolve and Apply (plus Loc@k, CodeBLEU and ECE) per run. With
/// several runs, the first is the reference and each other run gets a delta
/// line `reference - run`.
pub fn render(summaries: &[RunSummary]) -> String {
    let cutoffs: BTreeSet<usize> = summaries
        .iter()
        .flat_map(|s| s.loc.iter().map(|(k, _)| *k))
        .collect();
    let width = summaries
        .iter()
        .map(|s| s.name.len())
        .max()
        .unwrap_or(3)
        .max(3);
    let mut out = String::new();
    let _ = write!(
        out,
        "{:<width$} {:>4} {:>9} {:>9}",
        "run", "n", "Resolve", "Apply"
    );
    for k in &cutoffs {
        let _ = write!(out, " {:>8}", format!("Loc@{k}"));
    }
    let _ = writeln!(out, " {:>8} {:>8}", "CodeBLEU", "ECE");
    for s in summaries {
        let _ = write!(
            out,
            "{:<width$} {:>4} {:>9} {:>9}",
            s.name,
            s.instances,
            format!("{:.2}%", s.resolve),
            format!("{:.2}%", s.apply)
        );
        for k in &cutoffs {
            let cell = s
                .loc
                .iter()
                .find(|(c, _)| c == k)
                .map_or("-".into(), |(_, v)| format!("{:.2}%", 100.0 * v));
            let _ = write!(out, " {cell:>8}");
        }
        let _ = writeln!(out, " {:>8} {:>8}", opt(s.codebleu), opt(s.ece));
    }
    if let Some((reference, rest)) = summaries.split_first() {
        if !rest.is_empty() {
            let _ = writeln!(out);
            for s in rest {
                let _ = write!(
                    out,
                    "{} - {}: Resolve {:+.2}, Apply {:+.2}",
                    reference.name,
                    s.name,
                    reference.resolve - s.resolve,
                    reference.apply - s.apply
                );
                let diff = differences(reference, s);
                if diff.is_empty() {
                    let _ = writeln!(out);
                } else {
                    let _ = writeln!(out, " ({diff})");
                }
            }
        }
    }
    for s in summaries.iter().filter(|s| s.skipped > 0) {
        let _ = writeln!(
            out,
            "{}: {} unreadable record(s) skipped",
            s.name, s.skipped
        );
    }
    out
}

pub fn report(dirs: &[PathBuf]) -> Result<String> {
    let summaries = dirs
        .iter()
        .map(|d| summarize(d))
        .collect::<Result<Vec<_>>>()?;
    Ok(render(&summaries))
}
