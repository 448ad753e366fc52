use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::functions::LocatedDef;
use crate::ingest::{
    pack_context, ContextItem, IssueReport, ItemSource, RepoSnapshot, WeightTable,
};
use crate::policy::{generate, GenRequest, GenerationBackend, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModType {
    Insert,
    Replace,
    Delete,
}

impl ModType {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "insert" => Some(ModType::Insert),
            "replace" | "modify" => Some(ModType::Replace),
            "delete" | "remove" => Some(ModType::Delete),
            _ => None,
        }
    }
}

/// 1-based inclusive line range in a file. An insert goes before
/// `line_start` and has `line_end == line_start`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditLocation {
    pub file: String,
    pub line_start: usize,
    pub line_end: usize,
    pub mod_type: ModType,
}

static COLON_FORM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)([\w./-]+\.\w+):(\d+)(?:-(\d+))?:(insert|replace|modify|delete|remove)\b")
        .unwrap()
});
static TUPLE_FORM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)\(\s*['"]?([\w./-]+\.\w+)['"]?\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*['"]?(insert|replace|modify|delete|remove)['"]?\s*\)"#)
        .unwrap()
});

/// Every location written as `path:start-end:type` or
/// `(path, start, end, type)` in `reply`, in order of appearance.
pub fn parse_locations(reply: &str) -> Vec<EditLocation> {
    let mut found: Vec<(usize, EditLocation)> = Vec::new();
    for caps in COLON_FORM.captures_iter(reply) {
        let start: usize = caps[2].parse().unwrap_or(0);
        let end = caps
            .get(3)
            .and_then(|m| m.as_str().parse().ok())
            .unwrap_or(start);
        if let Some(mod_type) = ModType::parse(&caps[4]) {
            found.push((
                caps.get(0).unwrap().start(),
                loc(&caps[1], start, end, mod_type),
            ));
        }
    }
    for caps in TUPLE_FORM.captures_iter(reply) {
        let start: usize = caps[2].parse().unwrap_or(0);
        let end: usize = caps[3].parse().unwrap_or(0);
        if let Some(mod_type) = ModType::parse(&caps[4]) {
            found.push((
                caps.get(0).unwrap().start(),
                loc(&caps[1], start, end, mod_type),
            ));
        }
    }
    found.sort_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, l)| l).collect()
}

fn loc(file: &str, start: usize, end: usize, mod_type: ModType) -> EditLocation {
    let file = file.trim_start_matches("./");
    let file = file
        .strip_prefix("a/")
        .or_else(|| file.strip_prefix("b/"))
        .unwrap_or(file);
    EditLocation {
        file: file.to_string(),
        line_start: start,
        line_end: if mod_type == ModType::Insert {
            start
        } else {
            end
        },
        mod_type,
    }
}

fn valid(l: &EditLocation, snapshot: &RepoSnapshot) -> bool {
    let Some(f) = snapshot.get(&l.file) else {
        return false;
    };
    l.line_start >= 1 && l.line_start <= l.line_end && l.line_end <= f.line_count.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateConfig {
    pub max_locations: usize,
    /// Prompt budget in whitespace tokens.
    pub context_units: usize,
    pub weights: WeightTable,
    pub mode: Mode,
    pub seed: Option<u64>,
}

impl Default for LocateConfig {
    fn default() -> Self {
        LocateConfig {
            max_locations: 5,
            context_units: 6000,
            weights: WeightTable::default(),
            mode: Mode::NonThinking,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationProposal {
    pub locations: Vec<EditLocation>,
    pub fallback: bool,
    pub attempts: usize,
}

/// Context items for an issue and a ranked definition list. Definitions are
/// given decreasing relevance by rank.
pub fn localization_context(
    issue: &IssueReport,
    ranked: &[LocatedDef],
    snapshot: &RepoSnapshot,
    weights: &WeightTable,
) -> Vec<ContextItem> {
    let mut items = vec![ContextItem::new(
        ItemSource::IssueSection,
        issue.normalized.clone(),
        weights.weight(ItemSource::IssueSection),
        1.0,
    )];
    for m in &issue.error_messages {
        items.push(ContextItem::new(
            ItemSource::ErrorMessage,
            m.clone(),
            weights.weight(ItemSource::ErrorMessage),
            1.0,
        ));
    }
    for f in &issue.stack_frames {
        items.push(ContextItem::new(
            ItemSource::StackFrame,
            format!("{}:{}", f.path, f.line),
            weights.weight(ItemSource::StackFrame),
            1.0,
        ));
    }
    for (rank, d) in ranked.iter().enumerate() {
        let Some(file) = snapshot.get(&d.path) else {
            continue;
        };
        let body: String = file
            .content
            .split_inclusive('\n')
            .enumerate()
            .skip(d.def.span.start - 1)
            .take(d.def.span.len())
            .map(|(i, l)| format!("{:>5} {l}", i + 1))
            .collect();
        items.push(ContextItem::new(
            ItemSource::Chunk,
            format!(
                "# {}:{}-{}\n{body}",
                d.path, d.def.span.start, d.def.span.end
            ),
            weights.weight(ItemSource::Chunk),
            1.0 / (1.0 + rank as f64),
        ));
    }
    items
}

const INSTRUCTIONS: &str =
    "List the code locations that must change to fix the issue, one per line, \
as path:start-end:type where type is insert, replace or delete.\n\n";

/// Asks `backend` where to edit and validates the answer against
/// `snapshot`. An answer with no recognizable location is retried once. If
/// nothing valid remains, the top-ranked definition's span is returned as a
/// single replace location.
pub fn propose_edit_locations(
    issue: &IssueReport,
    ranked: &[LocatedDef],
    snapshot: &RepoSnapshot,
    backend: &dyn GenerationBackend,
    cfg: &LocateConfig,
) -> LocationProposal {
    let packed = pack_context(
        &localization_context(issue, ranked, snapshot, &cfg.weights),
        cfg.context_units,
    );
    let mut req = GenRequest::new(format!("{INSTRUCTIONS}{}", packed.render()), cfg.mode);
    req.seed = cfg.seed;
    let mut attempts = 0;
    let mut parsed = Vec::new();
    while attempts < 2 {
        attempts += 1;
        let reply = generate(&req, backend);
        parsed = parse_locations(&reply.answer);
        if !parsed.is_empty() {
            break;
        }
    }
    let mut locations: Vec<EditLocation> = Vec::new();
    for l in parsed.into_iter().filter(|l| valid(l, snapshot)) {
        if !locations.contains(&l) && locations.len() < cfg.max_locations {
            locations.push(l);
        }
    }
    if locations.is_empty() {
        if let Some(top) = ranked.first() {
            locations.push(EditLocation {
                file: top.path.clone(),
                line_start: top.def.span.start,
                line_end: top.def.span.end,
                mod_type: ModType::Replace,
            });
        }
        return LocationProposal {
            locations,
            fallback: true,
            attempts,
        };
    }
    LocationProposal {
        locations,
        fallback: false,
        attempts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{normalize_issue, SourceFile, SyntaxIndex};
    use crate::localize::rank_functions;
    use crate::policy::{Exhaustion, ScriptEntry, ScriptedBackend};

    fn setup() -> (RepoSnapshot, Vec<LocatedDef>) {
        let s = RepoSnapshot::from_files(
            "/r",
            [SourceFile::new(
                "m.py",
                "def f():\n    return 1\n\n\ndef g():\n    return 2\n",
            )],
        );
        let idx = SyntaxIndex::build(s.files());
        let ranked = rank_functions(&["m.py".into()], &idx);
        (s, ranked)
    }

    fn run(replies: &[&str]) -> (LocationProposal, usize) {
        let (s, ranked) = setup();
        let b = ScriptedBackend::new(
            replies.iter().map(|r| ScriptEntry::reply(*r)).collect(),
            Exhaustion::Wrap,
        )
        .unwrap();
        let p = propose_edit_locations(
            &normalize_issue("g is wrong"),
            &ranked,
            &s,
            &b,
            &LocateConfig::default(),
        );
        (p, b.calls())
    }

    #[test]
    fn well_formed_triplet_round_trips() {
        let (p, calls) = run(&["m.py:5-6:replace"]);
        assert_eq!(calls, 1);
        assert!(!p.fallback);
        assert_eq!(
            p.locations,
            [EditLocation {
                file: "m.py".into(),
                line_start: 5,
                line_end: 6,
                mod_type: ModType::Replace
            }]
        );
    }

    #[test]
    fn tuple_form_and_insert() {
        let got = parse_locations("(\"m.py\", 3, 9, \"insert\") and m.py:1-2:delete");
        assert_eq!(got.len(), 2);
        assert_eq!(
            (got[0].line_start, got[0].line_end, got[0].mod_type),
            (3, 3, ModType::Insert)
        );
        assert_eq!(got[1].mod_type, ModType::Delete);
    }

    #[test]
    fn unknown_file_falls_back_without_retry() {
        let (p, calls) = run(&["nope.py:1-2:replace"]);
        assert_eq!(calls, 1);
        assert!(p.fallback);
        assert_eq!(p.locations[0].file, "m.py");
    }

    #[test]
    fn unparseable_retries_once_then_falls_back() {
        let (p, calls) = run(&["I am not sure.", "still unsure"]);
        assert_eq!(calls, 2);
        assert!(p.fallback);
        let (p, calls) = run(&["hmm", "m.py:2-2:replace"]);
        assert_eq!(
            (calls, p.fallback, p.locations[0].line_start),
            (2, false, 2)
        );
    }

    #[test]
    fn out_of_range_discarded() {
        let (p, _) = run(&["m.py:5-60:replace\nm.py:1-1:replace"]);
        assert_eq!(p.locations.len(), 1);
        assert_eq!(p.locations[0].line_start, 1);
    }
}
