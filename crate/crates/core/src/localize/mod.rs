//! Fault localization: file ranking, dependency-ordered functions and edit
//! locations.

mod embed;
mod files;
mod functions;
mod lexical;
mod locations;

pub use embed::{Embedder, Embedding, MockEmbedder, RemoteEmbedder, DEFAULT_DIM};
pub use files::{frame_matches, mix, score_files, FileScore, STACK_FRAME_BONUS};
pub use functions::{rank_functions, LocatedDef};
pub use lexical::{build_lexical_index, document_text, tokenize, LexicalIndex};
pub use locations::{
    localization_context, parse_locations, propose_edit_locations, EditLocation, LocateConfig,
    LocationProposal, ModType,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LocalizeError {
    #[error("cannot index an empty snapshot")]
    EmptySnapshot,
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("invalid embedding: {0}")]
    BadEmbedding(String),
    #[error("Loc@k is undefined for an empty gold set")]
    EmptyGold,
    #[error("k must be at least 1")]
    ZeroK,
}

/// True iff one of the first `k` predicted paths is a gold path.
pub fn loc_at_k(
    predicted: &[String],
    gold: &BTreeSet<String>,
    k: usize,
) -> Result<bool, LocalizeError> {
    if gold.is_empty() {
        return Err(LocalizeError::EmptyGold);
    }
    if k == 0 {
        return Err(LocalizeError::ZeroK);
    }
    Ok(predicted.iter().take(k).any(|p| gold.contains(p)))
}

/// One line of a localization report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub instance_id: String,
    pub rank: usize,
    pub path: String,
    pub dense: f64,
    pub lexical: f64,
    pub hybrid: f64,
}
