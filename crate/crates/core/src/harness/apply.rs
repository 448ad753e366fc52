//! Zero-fuzz patch application.

use serde::{Deserialize, Serialize};

use super::diff::{FileDiff, FileOp, Hunk, LineKind, Patch};
use crate::ingest::{RepoSnapshot, SourceFile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum ApplyError {
    #[error("{file}: hunk {hunk} does not match at line {line}: {reason}")]
    Conflict {
        file: String,
        hunk: usize,
        line: usize,
        reason: String,
    },
    #[error("{0}: file does not exist")]
    Missing(String),
    #[error("{0}: file already exists")]
    AlreadyExists(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Line {
    text: String,
    newline: bool,
}

fn split_lines(content: &str) -> Vec<Line> {
    content
        .split_inclusive('\n')
        .map(|l| match l.strip_suffix('\n') {
            Some(t) => Line {
                text: t.to_string(),
                newline: true,
            },
            None => Line {
                text: l.to_string(),
                newline: false,
            },
        })
        .collect()
}

fn join_lines(lines: &[Line]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l.text);
        if l.newline {
            out.push('\n');
        }
    }
    out
}

fn matches_at(old: &[Line], pos: usize, hunk: &Hunk) -> Result<(), (usize, String)> {
    for (k, hl) in hunk.old_side().enumerate() {
        let idx = pos + k;
        let Some(line) = old.get(idx) else {
            return Err((idx + 1, "past end of file".into()));
        };
        if line.text != hl.text {
            return Err((
                idx + 1,
                format!("expected {:?}, found {:?}", hl.text, line.text),
            ));
        }
        if line.newline == hl.missing_newline {
            return Err((idx + 1, "end-of-file newline differs".into()));
        }
    }
    Ok(())
}

fn nominal_position(hunk: &Hunk) -> usize {
    if hunk.old_len == 0 {
        hunk.old_start
    } else {
        hunk.old_start.saturating_sub(1)
    }
}

/// Applies one file section to `content`. With `relaxed`, a hunk that does
/// not match at its stated line is moved to the nearest later position where
/// its old side matches exactly.
fn apply_hunks(content: &str, diff: &FileDiff, relaxed: bool) -> Result<String, ApplyError> {
    let old = split_lines(content);
    let mut out: Vec<Line> = Vec::with_capacity(old.len());
    let mut cursor = 0;
    for (hi, hunk) in diff.hunks.iter().enumerate() {
        let conflict = |line: usize, reason: String| ApplyError::Conflict {
            file: diff.path.clone(),
            hunk: hi + 1,
            line,
            reason,
        };
        let nominal = nominal_position(hunk);
        let pos =
            if nominal >= cursor && nominal <= old.len() && matches_at(&old, nominal, hunk).is_ok()
            {
                nominal
            } else if relaxed && hunk.old_len > 0 {
                (cursor..old.len())
                    .filter(|&p| matches_at(&old, p, hunk).is_ok())
                    .min_by_key(|&p| p.abs_diff(nominal))
                    .ok_or_else(|| conflict(nominal + 1, "context not found anywhere".into()))?
            } else if nominal < cursor {
                return Err(conflict(nominal + 1, "overlaps the previous hunk".into()));
            } else if nominal > old.len() {
                return Err(conflict(nominal + 1, "starts past end of file".into()));
            } else {
                let (line, reason) = matches_at(&old, nominal, hunk).unwrap_err();
                return Err(conflict(line, reason));
            };
        out.extend_from_slice(&old[cursor..pos]);
        let mut idx = pos;
        for hl in &hunk.lines {
            match hl.kind {
                LineKind::Context => {
                    out.push(old[idx].clone());
                    idx += 1;
                }
                LineKind::Remove => idx += 1,
                LineKind::Add => out.push(Line {
                    text: hl.text.clone(),
                    newline: !hl.missing_newline,
                }),
            }
        }
        cursor = idx;
    }
    out.extend_from_slice(&old[cursor..]);
    Ok(join_lines(&out))
}

fn apply_inner(
    snapshot: &RepoSnapshot,
    patch: &Patch,
    relaxed: bool,
) -> Result<RepoSnapshot, ApplyError> {
    let mut current = snapshot.clone();
    for diff in &patch.files {
        match diff.op {
            FileOp::Create => {
                if current.contains(&diff.path) {
                    return Err(ApplyError::AlreadyExists(diff.path.clone()));
                }
                let content = apply_hunks("", diff, false)?;
                current = current.with_file(SourceFile::new(diff.path.clone(), content));
            }
            FileOp::Modify | FileOp::Delete => {
                let file = current
                    .get(&diff.path)
                    .ok_or_else(|| ApplyError::Missing(diff.path.clone()))?;
                let content = apply_hunks(&file.content, diff, relaxed)?;
                if diff.op == FileOp::Delete {
                    if !content.is_empty() {
                        return Err(ApplyError::Conflict {
                            file: diff.path.clone(),
                            hunk: diff.hunks.len(),
                            line: 1,
                            reason: "deletion leaves content behind".into(),
                        });
                    }
                    current = current.without_file(&diff.path);
                } else {
                    current = current.with_file(SourceFile::new(diff.path.clone(), content));
                }
            }
        }
    }
    Ok(current)
}

/// Applies `patch` to a copy of `snapshot`. Every hunk must match exactly at
/// its stated position; the input snapshot is never modified.
pub fn apply_patch(snapshot: &RepoSnapshot, patch: &Patch) -> Result<RepoSnapshot, ApplyError> {
    apply_inner(snapshot, patch, false)
}

/// Like [`apply_patch`] but lets hunks move to where their context matches.
/// Used only to judge whether a non-applying candidate is well-formed code.
pub(crate) fn apply_relaxed(
    snapshot: &RepoSnapshot,
    patch: &Patch,
) -> Result<RepoSnapshot, ApplyError> {
    apply_inner(snapshot, patch, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap() -> RepoSnapshot {
        RepoSnapshot::from_files(
            "/repo",
            [SourceFile::new(
                "m.py",
                "def f():\n    return 1\n\n\ndef g():\n    return 2\n",
            )],
        )
    }

    #[test]
    fn empty_patch_is_identity() {
        assert_eq!(apply_patch(&snap(), &Patch::empty()).unwrap(), snap());
    }

    #[test]
    fn one_line_replacement() {
        let p = Patch::parse(
            "--- a/m.py\n+++ b/m.py\n@@ -5,2 +5,2 @@\n def g():\n-    return 2\n+    return 3\n",
        )
        .unwrap();
        let out = apply_patch(&snap(), &p).unwrap();
        assert_eq!(
            out.get("m.py").unwrap().content,
            "def f():\n    return 1\n\n\ndef g():\n    return 3\n"
        );
        assert_eq!(apply_patch(&out, &p.reverse()).unwrap(), snap());
    }

    #[test]
    fn drifted_context_conflicts() {
        let p = Patch::parse(
            "--- a/m.py\n+++ b/m.py\n@@ -4,2 +4,2 @@\n def g():\n-    return 2\n+    return 3\n",
        )
        .unwrap();
        match apply_patch(&snap(), &p) {
            Err(ApplyError::Conflict { file, hunk, .. }) => {
                assert_eq!((file.as_str(), hunk), ("m.py", 1))
            }
            other => panic!("{other:?}"),
        }
        assert!(apply_relaxed(&snap(), &p).is_ok());
    }

    #[test]
    fn create_and_delete() {
        let p =
            Patch::parse("--- /dev/null\n+++ b/n.py\n@@ -0,0 +1,2 @@\n+a = 1\n+b = 2\n").unwrap();
        let out = apply_patch(&snap(), &p).unwrap();
        assert_eq!(out.get("n.py").unwrap().content, "a = 1\nb = 2\n");
        assert!(matches!(
            apply_patch(&out, &p),
            Err(ApplyError::AlreadyExists(_))
        ));
        assert_eq!(apply_patch(&out, &p.reverse()).unwrap(), snap());
    }

    #[test]
    fn missing_file() {
        let p = Patch::parse("--- a/zz.py\n+++ b/zz.py\n@@ -1,1 +1,1 @@\n-a\n+b\n").unwrap();
        assert_eq!(
            apply_patch(&snap(), &p),
            Err(ApplyError::Missing("zz.py".into()))
        );
    }

    #[test]
    fn insertion_after_line() {
        let p = Patch::parse("--- a/m.py\n+++ b/m.py\n@@ -2,0 +3,1 @@\n+    # note\n").unwrap();
        let out = apply_patch(&snap(), &p).unwrap();
        assert!(out
            .get("m.py")
            .unwrap()
            .content
            .starts_with("def f():\n    return 1\n    # note\n"));
    }

    #[test]
    fn sequential_sections_on_same_file() {
        let p = Patch::parse(concat!(
            "--- a/m.py\n+++ b/m.py\n@@ -1,1 +1,2 @@\n def f():\n+    x = 0\n",
            "--- a/m.py\n+++ b/m.py\n@@ -3,1 +3,1 @@\n-    return 1\n+    return x\n",
        ))
        .unwrap();
        let out = apply_patch(&snap(), &p).unwrap();
        assert!(out
            .get("m.py")
            .unwrap()
            .content
            .starts_with("def f():\n    x = 0\n    return x\n"));
        assert_eq!(apply_patch(&out, &p.reverse()).unwrap(), snap());
    }

    #[test]
    fn missing_trailing_newline_round_trips() {
        let s = RepoSnapshot::from_files("/r", [SourceFile::new("a.py", "x = 1\ny = 2")]);
        let p = Patch::parse("--- a/a.py\n+++ b/a.py\n@@ -2,1 +2,1 @@\n-y = 2\n\\ No newline at end of file\n+y = 3\n").unwrap();
        let out = apply_patch(&s, &p).unwrap();
        assert_eq!(out.get("a.py").unwrap().content, "x = 1\ny = 3\n");
        assert_eq!(apply_patch(&out, &p.reverse()).unwrap(), s);
    }
}
