use serde::{Deserialize, Serialize};

use crate::ingest::{Language, RepoSnapshot};
use crate::python;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxDiagnostic {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxReport {
    pub valid: bool,
    /// One entry per failing file, in path order.
    pub diagnostics: Vec<SyntaxDiagnostic>,
}

/// Parses each listed Python file of `snapshot` (all Python files when
/// `paths` is `None`). Paths missing from the snapshot, such as deleted
/// files, and non-Python files are skipped.
pub fn check_syntax(snapshot: &RepoSnapshot, paths: Option<&[String]>) -> SyntaxReport {
    let mut selected: Vec<&str> = match paths {
        Some(p) => p.iter().map(String::as_str).collect(),
        None => snapshot.files().iter().map(|f| f.path.as_str()).collect(),
    };
    selected.sort_unstable();
    selected.dedup();
    let mut diagnostics = Vec::new();
    for path in selected {
        let Some(file) = snapshot.get(path) else {
            continue;
        };
        if file.language != Language::Python {
            continue;
        }
        if let Some(fault) = python::first_syntax_fault(&file.content) {
            diagnostics.push(SyntaxDiagnostic {
                file: path.to_string(),
                line: fault.line,
                message: fault.message,
            });
        }
    }
    SyntaxReport {
        valid: diagnostics.is_empty(),
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SourceFile;

    #[test]
    fn well_formed_and_broken() {
        let s = RepoSnapshot::from_files(
            "/r",
            [
                SourceFile::new("ok.py", "def f():\n    return 1\n"),
                SourceFile::new("bad.py", "x = 1\ndef g(:\n    pass\n"),
                SourceFile::new("notes.txt", "def (((\n"),
            ],
        );
        let ok = check_syntax(&s, Some(&["ok.py".to_string()]));
        assert!(ok.valid);
        let all = check_syntax(&s, None);
        assert!(!all.valid);
        assert_eq!(all.diagnostics.len(), 1);
        assert_eq!(all.diagnostics[0].file, "bad.py");
        assert_eq!(all.diagnostics[0].line, 2);
    }
}
