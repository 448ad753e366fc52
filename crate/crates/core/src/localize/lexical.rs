use std::collections::{BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;

use super::LocalizeError;
use crate::ingest::RepoSnapshot;

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]+").unwrap());

fn split_identifier(word: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for piece in word.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<char> = piece.chars().collect();
        let mut current = String::new();
        for (i, c) in chars.iter().enumerate() {
            let boundary = i > 0 && c.is_ascii_uppercase() && !chars[i - 1].is_ascii_uppercase();
            if boundary && !current.is_empty() {
                parts.push(std::mem::take(&mut current));
            }
            current.push(*c);
        }
        if !current.is_empty() {
            parts.push(current);
        }
    }
    parts
}

/// Terms of `text`: each maximal `[A-Za-z0-9_]` run lowercased, plus its
/// snake_case and camelCase parts when there is more than one. Terms shorter
/// than two characters are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for m in WORD.find_iter(text) {
        let word = m.as_str().trim_matches('_');
        if word.is_empty() {
            continue;
        }
        let whole = word.to_lowercase();
        if whole.chars().count() >= 2 {
            out.push(whole);
        }
        let parts = split_identifier(word);
        if parts.len() > 1 {
            out.extend(
                parts
                    .into_iter()
                    .map(|p| p.to_lowercase())
                    .filter(|p| p.chars().count() >= 2),
            );
        }
    }
    out
}

/// Term text of a file for indexing: its path followed by its content.
pub fn document_text(path: &str, content: &str) -> String {
    format!("{path}\n{content}")
}

/// Inverted index over file term frequencies, scored with Okapi BM25 using
/// the idf `ln((N - df + 0.5) / (df + 0.5) + 1)`.
#[derive(Debug, Clone)]
pub struct LexicalIndex {
    paths: Vec<String>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_len: Vec<usize>,
    avg_len: f64,
    pub k1: f64,
    pub b: f64,
}

pub fn build_lexical_index(
    snapshot: &RepoSnapshot,
    k1: f64,
    b: f64,
) -> Result<LexicalIndex, LocalizeError> {
    if snapshot.is_empty() {
        return Err(LocalizeError::EmptySnapshot);
    }
    let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
    let mut paths = Vec::with_capacity(snapshot.len());
    let mut doc_len = Vec::with_capacity(snapshot.len());
    for (doc, file) in snapshot.files().iter().enumerate() {
        let terms = tokenize(&document_text(&file.path, &file.content));
        doc_len.push(terms.len());
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in terms {
            *tf.entry(t).or_default() += 1;
        }
        for (t, n) in tf {
            postings.entry(t).or_default().push((doc, n));
        }
        paths.push(file.path.clone());
    }
    let avg_len = doc_len.iter().sum::<usize>() as f64 / doc_len.len() as f64;
    Ok(LexicalIndex {
        paths,
        postings,
        doc_len,
        avg_len,
        k1,
        b,
    })
}

impl LexicalIndex {
    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.paths.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Raw BM25 of every document for `query`, in index order. Each distinct
    /// query term counts once.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.paths.len()];
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let avg = if self.avg_len > 0.0 {
            self.avg_len
        } else {
            1.0
        };
        for term in terms {
            let Some(posting) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(&term);
            for &(doc, tf) in posting {
                let tf = f64::from(tf);
                let norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[doc] as f64 / avg);
                out[doc] += idf * tf * (self.k1 + 1.0) / (tf + norm);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SourceFile;

    #[test]
    fn identifiers_are_split() {
        assert_eq!(tokenize("read_file(x)"), ["read_file", "read", "file"]);
        assert_eq!(
            tokenize("parseHTTPResponse"),
            ["parsehttpresponse", "parse", "httpresponse"]
        );
        assert_eq!(tokenize("a + b"), Vec::<String>::new());
    }

    #[test]
    fn single_file_hit_and_absent_term() {
        let s = RepoSnapshot::from_files("/r", [SourceFile::new("a.py", "def load(): pass\n")]);
        let idx = build_lexical_index(&s, 1.2, 0.75).unwrap();
        assert!(idx.scores("load")[0] > 0.0);
        assert_eq!(idx.scores("zebra"), [0.0]);
    }

    #[test]
    fn empty_snapshot_errors() {
        let s = RepoSnapshot::from_files("/r", []);
        assert!(matches!(
            build_lexical_index(&s, 1.2, 0.75),
            Err(LocalizeError::EmptySnapshot)
        ));
    }
}
