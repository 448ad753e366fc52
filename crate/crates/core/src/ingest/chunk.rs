use serde::{Deserialize, Serialize};

use super::outline::FileOutline;
use super::repo::SourceFile;
use super::IngestError;
use crate::text::{lines_inclusive, unit_len};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkKind {
    WholeDefinition,
    Fragment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeChunk {
    pub file: String,
    /// 1-based inclusive.
    pub start_line: usize,
    pub end_line: usize,
    pub kind: ChunkKind,
    pub text: String,
    /// Lines shared with the previous chunk; the previous chunk ends at
    /// `start_line + overlap - 1`. Zero for whole definitions and for the
    /// first fragment of a definition.
    pub overlap: usize,
}

impl CodeChunk {
    pub fn units(&self) -> usize {
        unit_len(&self.text)
    }
}

/// Splits a file at top-level definition boundaries. Each top-level definition
/// owns the lines since the previous one ended (leading imports belong to the
/// first, trailing lines to the last). A definition that does not fit in
/// `max_units` is cut into fragments where each fragment after the first starts
/// `overlap` lines before the previous one ended.
pub fn chunk_file(
    file: &SourceFile,
    outline: &FileOutline,
    max_units: usize,
    overlap: usize,
) -> Result<Vec<CodeChunk>, IngestError> {
    if max_units <= overlap {
        return Err(IngestError::BudgetNotAboveOverlap { max_units, overlap });
    }
    let lines = lines_inclusive(&file.content);
    if lines.is_empty() {
        return Ok(Vec::new());
    }
    let units: Vec<usize> = lines.iter().map(|l| unit_len(l)).collect();
    let slice = |s: usize, e: usize| lines[s - 1..e].concat();
    let span_units = |s: usize, e: usize| units[s - 1..e].iter().sum::<usize>();

    let mut chunks = Vec::new();
    for (seg_start, seg_end) in segments(outline, lines.len()) {
        if span_units(seg_start, seg_end) <= max_units {
            chunks.push(CodeChunk {
                file: file.path.clone(),
                start_line: seg_start,
                end_line: seg_end,
                kind: ChunkKind::WholeDefinition,
                text: slice(seg_start, seg_end),
                overlap: 0,
            });
            continue;
        }
        let mut start = seg_start;
        let mut shared = 0;
        loop {
            let mut end = start;
            let mut used = units[start - 1];
            if used > max_units {
                return Err(IngestError::LineExceedsBudget {
                    path: file.path.clone(),
                    line: start,
                    max_units,
                });
            }
            while end < seg_end && used + units[end] <= max_units {
                used += units[end];
                end += 1;
            }
            chunks.push(CodeChunk {
                file: file.path.clone(),
                start_line: start,
                end_line: end,
                kind: ChunkKind::Fragment,
                text: slice(start, end),
                overlap: shared,
            });
            if end == seg_end {
                break;
            }
            // Largest overlap (up to the configured one) that still leaves room
            // for the next unseen line, so every fragment makes progress.
            let mut k = overlap.min(end - start);
            while k > 0 && span_units(end - k + 1, end) + units[end] > max_units {
                k -= 1;
            }
            shared = k;
            start = end - k + 1;
        }
    }
    Ok(chunks)
}

fn segments(outline: &FileOutline, line_count: usize) -> Vec<(usize, usize)> {
    let mut bounds: Vec<usize> = outline
        .definitions
        .iter()
        .filter(|d| d.parent.is_none())
        .map(|d| d.span.end.min(line_count))
        .collect();
    bounds.sort_unstable();
    bounds.dedup();
    let mut out = Vec::new();
    let mut start = 1;
    for end in bounds {
        if end >= start {
            out.push((start, end));
            start = end + 1;
        }
    }
    match out.last_mut() {
        Some(last) if start <= line_count => last.1 = line_count,
        None => out.push((1, line_count)),
        _ => {}
    }
    out
}

/// Concatenates chunk texts, dropping each chunk's overlapping prefix lines.
/// For chunks of one file in order this reproduces the file exactly.
pub fn reassemble(chunks: &[CodeChunk]) -> String {
    chunks
        .iter()
        .flat_map(|c| lines_inclusive(&c.text).into_iter().skip(c.overlap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_outline, DefKind, Definition, LineSpan};
    use std::collections::BTreeSet;

    #[test]
    fn small_functions_become_whole_chunks() {
        let src = "import os\n\ndef a():\n    return 1\n\ndef b():\n    return 2\n\n\ndef c():\n    return os.sep\n";
        let file = SourceFile::new("m.py", src);
        let chunks = chunk_file(&file, &parse_outline(&file), 2000, 8).unwrap();
        assert_eq!(chunks.len(), 3);
        assert!(chunks.iter().all(|c| c.kind == ChunkKind::WholeDefinition));
        assert_eq!((chunks[0].start_line, chunks[0].end_line), (1, 4));
        assert_eq!((chunks[2].start_line, chunks[2].end_line), (8, 11));
        assert_eq!(reassemble(&chunks), src);
    }

    fn one_token_lines(n: usize) -> (SourceFile, FileOutline) {
        let src: String = (1..=n).map(|i| format!("t{i}\n")).collect();
        let file = SourceFile::new("long.py", src);
        let outline = FileOutline {
            path: file.path.clone(),
            definitions: vec![Definition {
                name: "long".into(),
                kind: DefKind::Function,
                span: LineSpan::new(1, n),
                referenced_names: BTreeSet::new(),
                parent: None,
            }],
            degraded: false,
        };
        (file, outline)
    }

    #[test]
    fn fragments_follow_overlap_recurrence() {
        // 40 one-token lines per fragment, 8 lines of overlap: starts advance by 32.
        let (file, outline) = one_token_lines(130);
        let chunks = chunk_file(&file, &outline, 40, 8).unwrap();
        let starts: Vec<_> = chunks.iter().map(|c| c.start_line).collect();
        assert_eq!(starts, [1, 33, 65, 97]);
        for w in chunks.windows(2) {
            assert_eq!(w[1].start_line, w[0].end_line - 8 + 1);
        }
        assert_eq!(reassemble(&chunks), file.content);
    }

    #[test]
    fn hundred_line_definition_stops_at_its_end() {
        let (file, outline) = one_token_lines(100);
        let chunks = chunk_file(&file, &outline, 40, 8).unwrap();
        let ranges: Vec<_> = chunks.iter().map(|c| (c.start_line, c.end_line)).collect();
        assert_eq!(ranges, [(1, 40), (33, 72), (65, 100)]);
    }

    #[test]
    fn budget_must_exceed_overlap() {
        let (file, outline) = one_token_lines(3);
        assert!(matches!(
            chunk_file(&file, &outline, 8, 8),
            Err(IngestError::BudgetNotAboveOverlap { .. })
        ));
    }

    #[test]
    fn overlong_line_is_reported() {
        let file = SourceFile::new("x.py", "a b c d e f\n");
        let outline = parse_outline(&file);
        assert!(matches!(
            chunk_file(&file, &outline, 3, 1),
            Err(IngestError::LineExceedsBudget { line: 1, .. })
        ));
    }

    #[test]
    fn overlap_shrinks_when_lines_are_heavy() {
        // Every line is 3 units; budget 7 fits two lines, so a full overlap of
        // 2 lines would leave no room for new content.
        let src: String = (0..6).map(|i| format!("a{i} = {i}\n")).collect();
        let file = SourceFile::new("h.py", src.clone());
        let outline = FileOutline {
            path: "h.py".into(),
            definitions: vec![],
            degraded: false,
        };
        let chunks = chunk_file(&file, &outline, 7, 2).unwrap();
        assert!(chunks.iter().all(|c| c.units() <= 7));
        assert_eq!(reassemble(&chunks), src);
        for w in chunks.windows(2) {
            assert_eq!(w[1].start_line + w[1].overlap, w[0].end_line + 1);
        }
    }

    #[test]
    fn empty_file_has_no_chunks() {
        let file = SourceFile::new("e.py", "");
        assert!(chunk_file(&file, &parse_outline(&file), 10, 2)
            .unwrap()
            .is_empty());
    }
}
