use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::LocalizeError;
use crate::policy::RemoteBackend;

pub const DEFAULT_DIM: usize = 256;

/// Unit-norm dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values` to unit length. Fails on non-finite or all-zero input.
    pub fn normalized(values: Vec<f64>) -> Result<Self, LocalizeError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(LocalizeError::BadEmbedding(
                "empty or non-finite vector".into(),
            ));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(LocalizeError::BadEmbedding("zero vector".into()));
        }
        Ok(Embedding(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0)
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Embedding, LocalizeError>;
}

/// Deterministic offline embedder: signed feature hashing of character
/// trigrams of the lowercased, whitespace-collapsed text padded with one
/// space on each side. FNV-1a 64 picks the bucket (`h % dim`) and the sign
/// (top bit set means −1).
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    pub dim: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder { dim: DEFAULT_DIM }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, LocalizeError> {
        let collapsed = text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        let chars: Vec<char> = format!(" {collapsed} ").chars().collect();
        let dim = self.dim.max(1);
        let mut v = vec![0.0; dim];
        let mut buf = String::new();
        for w in chars.windows(3) {
            buf.clear();
            buf.extend(w);
            let h = fnv1a(buf.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % dim as u64) as usize] += sign;
        }
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        Embedding::normalized(v)
    }
}

/// Embeddings from a completion server's `/v1/embeddings` route.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub backend: Arc<RemoteBackend>,
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, LocalizeError> {
        let raw = self
            .backend
            .embed_raw(text)
            .map_err(|e| LocalizeError::Embedding(e.to_string()))?;
        Embedding::normalized(raw)
    }
}
