use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::pack::WeightTable;
use super::IngestError;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Python,
    Other,
}

impl Language {
    pub fn from_path(path: &str) -> Self {
        if path.ends_with(".py") || path.ends_with(".pyi") {
            Language::Python
        } else {
            Language::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Repo-relative path with `/` separators.
    pub path: String,
    pub content: String,
    pub line_count: usize,
    pub language: Language,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let path = path.into();
        let content = content.into();
        SourceFile {
            line_count: text::line_count(&content),
            language: Language::from_path(&path),
            path,
            content,
        }
    }
}

/// Immutable view of the files of a checkout. Files are kept sorted by path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSnapshot {
    pub root: PathBuf,
    files: Vec<SourceFile>,
}

impl RepoSnapshot {
    /// Builds a snapshot from in-memory files. Later duplicates replace earlier ones.
    pub fn from_files(
        root: impl Into<PathBuf>,
        files: impl IntoIterator<Item = SourceFile>,
    ) -> Self {
        let map: BTreeMap<String, SourceFile> =
            files.into_iter().map(|f| (f.path.clone(), f)).collect();
        RepoSnapshot {
            root: root.into(),
            files: map.into_values().collect(),
        }
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&SourceFile> {
        self.files
            .binary_search_by(|f| f.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.files[i])
    }

    pub fn contains(&self, path: &str) -> bool {
        self.get(path).is_some()
    }

    /// Returns a copy with `file` inserted or replaced.
    pub fn with_file(&self, file: SourceFile) -> Self {
        let mut files = self.files.clone();
        match files.binary_search_by(|f| f.path.as_str().cmp(&file.path)) {
            Ok(i) => files[i] = file,
            Err(i) => files.insert(i, file),
        }
        RepoSnapshot {
            root: self.root.clone(),
            files,
        }
    }

    /// Returns a copy without `path`.
    pub fn without_file(&self, path: &str) -> Self {
        RepoSnapshot {
            root: self.root.clone(),
            files: self
                .files
                .iter()
                .filter(|f| f.path != path)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    /// Chunk budget in whitespace tokens.
    pub max_chunk_units: usize,
    /// Overlap between consecutive fragments, in lines.
    pub overlap_lines: usize,
    /// Budget for the packed model context, in whitespace tokens.
    pub context_units: usize,
    pub weights: WeightTable,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            include: vec!["**/*.py".into()],
            exclude: vec![
                "**/.git/**".into(),
                "**/vendor/**".into(),
                "**/vendored/**".into(),
                "**/third_party/**".into(),
                "**/site-packages/**".into(),
                "**/node_modules/**".into(),
                "**/testdata/**".into(),
                "**/test_data/**".into(),
            ],
            max_chunk_units: 2000,
            overlap_lines: 8,
            context_units: 6000,
            weights: WeightTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub path: String,
    pub reason: String,
}

fn build_set(globs: &[String]) -> Result<GlobSet, IngestError> {
    let mut builder = GlobSetBuilder::new();
    for g in globs {
        let glob = Glob::new(g).map_err(|e| IngestError::BadGlob(g.clone(), e.to_string()))?;
        builder.add(glob);
    }
    builder
        .build()
        .map_err(|e| IngestError::BadGlob(globs.join(","), e.to_string()))
}

fn relative_path(root: &Path, path: &Path) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let mut parts = Vec::new();
    for c in rel.components() {
        match c {
            Component::Normal(s) => parts.push(s.to_str()?.to_string()),
            _ => return None,
        }
    }
    if parts.is_empty() {
        None
    } else {
        Some(parts.join("/"))
    }
}

/// Walks `root` and loads every file matched by the include globs and not by
/// the exclude globs. Symlinks are not followed. Files that cannot be read or
/// are not UTF-8 are skipped and reported as warnings.
pub fn scan_repository(
    root: &Path,
    config: &IngestConfig,
) -> Result<(RepoSnapshot, Vec<ScanWarning>), IngestError> {
    std::fs::read_dir(root).map_err(|source| IngestError::UnreadableRoot {
        path: root.to_path_buf(),
        source,
    })?;
    let include = build_set(&config.include)?;
    let exclude = build_set(&config.exclude)?;

    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                let path = err
                    .path()
                    .and_then(|p| relative_path(root, p))
                    .unwrap_or_default();
                warnings.push(ScanWarning {
                    path,
                    reason: err.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(rel) = relative_path(root, entry.path()) else {
            continue;
        };
        if !include.is_match(&rel) || exclude.is_match(&rel) {
            continue;
        }
        match std::fs::read(entry.path()) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(content) => files.push(SourceFile::new(rel, content)),
                Err(_) => warnings.push(ScanWarning {
                    path: rel,
                    reason: "not valid UTF-8".into(),
                }),
            },
            Err(err) => warnings.push(ScanWarning {
                path: rel,
                reason: err.to_string(),
            }),
        }
    }
    for w in &warnings {
        tracing::warn!(path = %w.path, reason = %w.reason, "skipped file during scan");
    }
    Ok((RepoSnapshot::from_files(root, files), warnings))
}
