//! Repository and issue ingestion: scanning, outlines, chunking, issue
//! normalization and context packing.

mod chunk;
mod issue;
mod outline;
mod pack;
mod repo;

pub use chunk::{chunk_file, reassemble, ChunkKind, CodeChunk};
pub use issue::{extract_stack_frames, normalize_issue, IssueReport, StackFrame};
pub use outline::{parse_outline, DefKind, Definition, FileOutline, LineSpan, SyntaxIndex};
pub use pack::{pack_context, ContextItem, ItemSource, PackedContext, WeightTable};
pub use repo::{scan_repository, IngestConfig, Language, RepoSnapshot, ScanWarning, SourceFile};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read repository root {path}: {source}")]
    UnreadableRoot {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid glob `{0}`: {1}")]
    BadGlob(String, String),
    #[error("chunk budget ({max_units} units) must exceed overlap ({overlap} lines)")]
    BudgetNotAboveOverlap { max_units: usize, overlap: usize },
    #[error("{path}:{line} alone exceeds the chunk budget of {max_units} units")]
    LineExceedsBudget {
        path: String,
        line: usize,
        max_units: usize,
    },
}
