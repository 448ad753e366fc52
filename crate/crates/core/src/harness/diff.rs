//! Unified diff model, parser and canonical renderer.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static HUNK_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@").unwrap());

pub const DEV_NULL: &str = "/dev/null";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("line {line}: malformed hunk header `{text}`")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: hunk ends before its header counts are satisfied")]
    HunkTooShort { line: usize },
    #[error("line {line}: hunk has more {side} lines than its header declares")]
    HunkTooLong { line: usize, side: &'static str },
    #[error("line {line}: `+++` header without a preceding `---` header")]
    TargetWithoutSource { line: usize },
    #[error("line {line}: both sides of the file header are /dev/null")]
    NoPath { line: usize },
    #[error("line {line}: renaming {from} to {to} is not supported")]
    Rename {
        line: usize,
        from: String,
        to: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Context,
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HunkLine {
    pub kind: LineKind,
    /// Line content without its terminator.
    pub text: String,
    /// Followed by `\ No newline at end of file`.
    pub missing_newline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    pub file: String,
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    pub fn old_side(&self) -> impl Iterator<Item = &HunkLine> {
        self.lines.iter().filter(|l| l.kind != LineKind::Add)
    }

    pub fn new_side(&self) -> impl Iterator<Item = &HunkLine> {
        self.lines.iter().filter(|l| l.kind != LineKind::Remove)
    }

    pub fn added(&self) -> impl Iterator<Item = &HunkLine> {
        self.lines.iter().filter(|l| l.kind == LineKind::Add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileOp {
    Modify,
    Create,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FileDiff {
    /// Repo-relative path (without `a/` or `b/`).
    pub path: String,
    pub op: FileOp,
    pub hunks: Vec<Hunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub diff_text: String,
    /// File sections in order. Several sections may touch the same path; each
    /// then applies to the result of the previous one.
    pub files: Vec<FileDiff>,
}

fn header_path(rest: &str) -> Option<String> {
    let raw = rest.split('\t').next().unwrap_or("").trim_end();
    if raw == DEV_NULL {
        return None;
    }
    let stripped = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(stripped.to_string())
}

impl Patch {
    pub fn empty() -> Self {
        Patch {
            diff_text: String::new(),
            files: Vec::new(),
        }
    }

    /// Parses every `---`/`+++` file section of `text`. Lines outside file
    /// sections (prose, `diff --git`, `index`) are ignored. Hunk bodies must
    /// match their header counts exactly.
    pub fn parse(text: &str) -> Result<Patch, DiffError> {
        let lines: Vec<&str> = text
            .split_inclusive('\n')
            .map(|l| l.strip_suffix('\n').unwrap_or(l))
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect();
        let mut files = Vec::new();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i];
            if line.starts_with("+++ ") {
                return Err(DiffError::TargetWithoutSource { line: i + 1 });
            }
            if !(line.starts_with("--- ")
                && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ ")))
            {
                i += 1;
                continue;
            }
            let header_line = i + 1;
            let old = header_path(&line[4..]);
            let new = header_path(&lines[i + 1][4..]);
            let (path, op) = match (old, new) {
                (None, None) => return Err(DiffError::NoPath { line: header_line }),
                (None, Some(n)) => (n, FileOp::Create),
                (Some(o), None) => (o, FileOp::Delete),
                (Some(o), Some(n)) if o != n => {
                    return Err(DiffError::Rename {
                        line: header_line,
                        from: o,
                        to: n,
                    })
                }
                (Some(o), Some(_)) => (o, FileOp::Modify),
            };
            i += 2;
            let mut hunks = Vec::new();
            while i < lines.len() && lines[i].starts_with("@@") {
                let cap = HUNK_HEADER
                    .captures(lines[i])
                    .ok_or_else(|| DiffError::BadHeader {
                        line: i + 1,
                        text: lines[i].to_string(),
                    })?;
                let num = |k: usize, default: usize| {
                    cap.get(k).map_or(Ok(default), |m| {
                        m.as_str()
                            .parse::<usize>()
                            .map_err(|_| DiffError::BadHeader {
                                line: i + 1,
                                text: lines[i].to_string(),
                            })
                    })
                };
                let mut hunk = Hunk {
                    file: path.clone(),
                    old_start: num(1, 0)?,
                    old_len: num(2, 1)?,
                    new_start: num(3, 0)?,
                    new_len: num(4, 1)?,
                    lines: Vec::new(),
                };
                let (mut old_left, mut new_left) = (hunk.old_len, hunk.new_len);
                i += 1;
                while old_left > 0 || new_left > 0 {
                    let Some(&body) = lines.get(i) else {
                        return Err(DiffError::HunkTooShort { line: i + 1 });
                    };
                    let (kind, text) = match body.as_bytes().first() {
                        Some(b' ') => (LineKind::Context, &body[1..]),
                        None => (LineKind::Context, ""),
                        Some(b'-') => (LineKind::Remove, &body[1..]),
                        Some(b'+') => (LineKind::Add, &body[1..]),
                        Some(b'\\') => {
                            if let Some(last) = hunk.lines.last_mut() {
                                last.missing_newline = true;
                            }
                            i += 1;
                            continue;
                        }
                        _ => return Err(DiffError::HunkTooShort { line: i + 1 }),
                    };
                    if kind != LineKind::Add {
                        old_left = old_left.checked_sub(1).ok_or(DiffError::HunkTooLong {
                            line: i + 1,
                            side: "old",
                        })?;
                    }
                    if kind != LineKind::Remove {
                        new_left = new_left.checked_sub(1).ok_or(DiffError::HunkTooLong {
                            line: i + 1,
                            side: "new",
                        })?;
                    }
                    hunk.lines.push(HunkLine {
                        kind,
                        text: text.to_string(),
                        missing_newline: false,
                    });
                    i += 1;
                }
                if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                    if let Some(last) = hunk.lines.last_mut() {
                        last.missing_newline = true;
                    }
                    i += 1;
                }
                hunks.push(hunk);
            }
            files.push(FileDiff { path, op, hunks });
        }
        Ok(Patch {
            diff_text: text.to_string(),
            files,
        })
    }

    pub fn from_files(files: Vec<FileDiff>) -> Patch {
        let mut p = Patch {
            diff_text: String::new(),
            files,
        };
        p.diff_text = p.render();
        p
    }

    pub fn hunks(&self) -> impl Iterator<Item = &Hunk> {
        self.files.iter().flat_map(|f| f.hunks.iter())
    }

    pub fn hunk_count(&self) -> usize {
        self.hunks().count()
    }

    pub fn is_empty(&self) -> bool {
        self.hunk_count() == 0
    }

    /// Paths touched, in first-seen order.
    pub fn changed_paths(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for f in &self.files {
            if !out.contains(&f.path) {
                out.push(f.path.clone());
            }
        }
        out
    }

    /// Canonical unified diff: `--- a/p`, `+++ b/p`, `@@ -s,l +s,l @@`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in &self.files {
            let (old, new) = match f.op {
                FileOp::Modify => (format!("a/{}", f.path), format!("b/{}", f.path)),
                FileOp::Create => (DEV_NULL.to_string(), format!("b/{}", f.path)),
                FileOp::Delete => (format!("a/{}", f.path), DEV_NULL.to_string()),
            };
            out.push_str(&format!("--- {old}\n+++ {new}\n"));
            for h in &f.hunks {
                out.push_str(&format!(
                    "@@ -{},{} +{},{} @@\n",
                    h.old_start, h.old_len, h.new_start, h.new_len
                ));
                for l in &h.lines {
                    let sigil = match l.kind {
                        LineKind::Context => ' ',
                        LineKind::Add => '+',
                        LineKind::Remove => '-',
                    };
                    out.push(sigil);
                    out.push_str(&l.text);
                    out.push('\n');
                    if l.missing_newline {
                        out.push_str("\\ No newline at end of file\n");
                    }
                }
            }
        }
        out
    }

    /// The inverse patch: sections in reverse order with both sides swapped.
    pub fn reverse(&self) -> Patch {
        let files = self
            .files
            .iter()
            .rev()
            .map(|f| FileDiff {
                path: f.path.clone(),
                op: match f.op {
                    FileOp::Modify => FileOp::Modify,
                    FileOp::Create => FileOp::Delete,
                    FileOp::Delete => FileOp::Create,
                },
                hunks: f
                    .hunks
                    .iter()
                    .map(|h| Hunk {
                        file: h.file.clone(),
                        old_start: h.new_start,
                        old_len: h.new_len,
                        new_start: h.old_start,
                        new_len: h.old_len,
                        lines: h
                            .lines
                            .iter()
                            .map(|l| HunkLine {
                                kind: match l.kind {
                                    LineKind::Context => LineKind::Context,
                                    LineKind::Add => LineKind::Remove,
                                    LineKind::Remove => LineKind::Add,
                                },
                                ..l.clone()
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Patch::from_files(files)
    }

    /// Recomputes `new_start` of every hunk from `old_start` and the line
    /// delta of the hunks before it in the same section.
    pub fn renumbered(&self) -> Patch {
        let files = self
            .files
            .iter()
            .map(|f| {
                let mut delta: isize = 0;
                let hunks = f
                    .hunks
                    .iter()
                    .map(|h| {
                        let mut h = h.clone();
                        let base = if h.old_len == 0 {
                            h.old_start + 1
                        } else {
                            h.old_start
                        };
                        let start = base as isize + delta;
                        h.new_start = if h.new_len == 0 {
                            (start - 1).max(0) as usize
                        } else {
                            start.max(1) as usize
                        };
                        delta += h.new_len as isize - h.old_len as isize;
                        h
                    })
                    .collect();
                FileDiff {
                    path: f.path.clone(),
                    op: f.op,
                    hunks,
                }
            })
            .collect();
        Patch::from_files(files)
    }
}

/// Pulls diff text out of a model reply: the first fenced block that contains
/// a file header, else everything from the first `--- ` line on.
pub fn extract_diff(reply: &str) -> Option<String> {
    let mut in_fence = false;
    let mut block: Vec<&str> = Vec::new();
    for line in reply.lines() {
        if line.trim_start().starts_with("```") {
            if in_fence {
                if block.iter().any(|l| l.starts_with("--- ")) {
                    let mut s = block.join("\n");
                    s.push('\n');
                    return Some(s);
                }
                block.clear();
            }
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            block.push(line);
        }
    }
    let start = reply
        .match_indices("--- ")
        .find(|(i, _)| *i == 0 || reply.as_bytes()[i - 1] == b'\n')?
        .0;
    let mut s = reply[start..].to_string();
    if !s.ends_with('\n') {
        s.push('\n');
    }
    Some(s)
}
