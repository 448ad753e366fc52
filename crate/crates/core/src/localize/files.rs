use serde::{Deserialize, Serialize};

use super::embed::{Embedder, Embedding};
use super::lexical::{document_text, LexicalIndex};
use crate::ingest::{IssueReport, RepoSnapshot, StackFrame};

pub const STACK_FRAME_BONUS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub path: String,
    /// Cosine similarity in `[-1, 1]`; zero when dense scoring was off.
    pub dense: f64,
    /// BM25 divided by the corpus maximum.
    pub lexical: f64,
    pub alpha: f64,
    /// Stack-frame bonus added to the mix.
    pub bonus: f64,
    pub hybrid: f64,
}

/// `alpha * (dense + 1) / 2 + (1 - alpha) * lexical`.
pub fn mix(dense: f64, lexical: f64, alpha: f64) -> f64 {
    alpha * (dense + 1.0) / 2.0 + (1.0 - alpha) * lexical
}

/// Whether a traceback path names `path`: equal, or one ends with the
/// other at a path-component boundary.
pub fn frame_matches(frame: &str, path: &str) -> bool {
    let frame = frame.replace('\\', "/");
    let frame = frame.trim_start_matches("./");
    frame == path || frame.ends_with(&format!("/{path}")) || path.ends_with(&format!("/{frame}"))
}

fn dense_scores(
    query: &str,
    snapshot: &RepoSnapshot,
    embedder: &dyn Embedder,
) -> Result<Vec<f64>, super::LocalizeError> {
    let q: Embedding = embedder.embed(query)?;
    snapshot
        .files()
        .iter()
        .map(|f| Ok(q.cosine(&embedder.embed(&document_text(&f.path, &f.content))?)))
        .collect()
}

/// Ranks every file of `snapshot` by hybrid score, descending, ties by path.
/// `index` must have been built from the same snapshot. With `alpha = 0` the
/// embedder is never called; if embedding fails the ranking falls back to
/// lexical only and every score reports `alpha = 0`.
pub fn score_files(
    issue: &IssueReport,
    snapshot: &RepoSnapshot,
    index: &LexicalIndex,
    embedder: &dyn Embedder,
    alpha: f64,
) -> Vec<FileScore> {
    let alpha = alpha.clamp(0.0, 1.0);
    let query = &issue.normalized;
    let raw = index.scores(query);
    let max = raw.iter().copied().fold(0.0, f64::max);
    let lexical: Vec<f64> = raw
        .iter()
        .map(|s| if max > 0.0 { s / max } else { 0.0 })
        .collect();
    let (dense, alpha) = if alpha == 0.0 {
        (vec![0.0; snapshot.len()], 0.0)
    } else {
        match dense_scores(query, snapshot, embedder) {
            Ok(d) => (d, alpha),
            Err(e) => {
                tracing::warn!(error = %e, "embedding failed; ranking files lexically");
                (vec![0.0; snapshot.len()], 0.0)
            }
        }
    };
    let frames: &[StackFrame] = &issue.stack_frames;
    let mut out: Vec<FileScore> = snapshot
        .files()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let bonus = if frames.iter().any(|fr| frame_matches(&fr.path, &f.path)) {
                STACK_FRAME_BONUS
            } else {
                0.0
            };
            let base = mix(dense[i], lexical[i], alpha);
            FileScore {
                path: f.path.clone(),
                dense: dense[i],
                lexical: lexical[i],
                alpha,
                bonus,
                hybrid: (base + bonus).min(1.0),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.hybrid
            .total_cmp(&a.hybrid)
            .then_with(|| a.path.cmp(&b.path))
    });
    out
}
