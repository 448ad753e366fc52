use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StackFrame {
    pub path: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueReport {
    pub raw: String,
    pub normalized: String,
    pub error_messages: Vec<String>,
    pub stack_frames: Vec<StackFrame>,
    pub code_blocks: Vec<String>,
    pub repro_steps: Vec<String>,
}

static HTML_COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());
static HTML_BREAK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<br\s*/?>").unwrap());
static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)</?(?:a|b|i|u|s|em|strong|code|pre|p|div|span|img|details|summary|ul|ol|li|h[1-6]|table|thead|tbody|tr|td|th|sub|sup|kbd|blockquote|hr|tt|del|ins|strike|small|big|center|font|section|article)(?:\s[^<>]*)?/?>"#,
    )
    .unwrap()
});
static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:`{3,}|~{3,})\s*([\w+#.-]*)\s*$").unwrap());
static BULLET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\s*)[*+]\s+").unwrap());
static BOLD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*([^*\n]+)\*\*").unwrap());
static BLANK_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n{3,}").unwrap());

static PY_FRAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"File "([^"\n]+)", line ([^,\s]+)"#).unwrap());
static COLON_FRAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^\s*([\w./\\-]+\.py):([^:\s]+):").unwrap());

static ERROR_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:[A-Za-z_][\w]*\.)*[A-Z]\w*(?:Error|Exception|Warning|Fault|Exit|Interrupt)\b(?::.*)?$|^(?i:error|fatal)\s*:\s*\S.*$",
    )
    .unwrap()
});
static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+[.)]\s+(\S.*)$").unwrap());
static DASH_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*-\s+(\S.*)$").unwrap());
static HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:#{1,6}\s+(.*)|([^\s].*):)\s*$").unwrap());
static REPRO_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)reproduc|steps").unwrap());

fn decode_entities(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&#x27;", "'")
        .replace("&nbsp;", " ")
        .replace("&amp;", "&")
}

/// One cleaning pass. Tags and markdown markers are only touched outside fenced code.
fn clean_once(text: &str) -> String {
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    let text = HTML_COMMENT.replace_all(&text, "");
    let mut out: Vec<String> = Vec::new();
    let mut in_code = false;
    for line in text.split('\n') {
        if let Some(cap) = FENCE.captures(line) {
            out.push(if in_code {
                "```".to_string()
            } else {
                format!("```{}", &cap[1])
            });
            in_code = !in_code;
            continue;
        }
        let line = if in_code {
            decode_entities(line)
        } else {
            let l = HTML_BREAK.replace_all(line, "\n");
            let l = HTML_TAG.replace_all(&l, "");
            let l = BOLD.replace_all(&l, "$1");
            let l = BULLET.replace(&l, "${1}- ");
            decode_entities(&l)
        };
        out.push(line.trim_end().to_string());
    }
    let joined = out.join("\n");
    let joined: String = joined
        .split('\n')
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n");
    let joined = BLANK_RUN.replace_all(&joined, "\n\n");
    joined.trim_matches('\n').to_string()
}

fn clean(raw: &str) -> String {
    let mut current = raw.to_string();
    for _ in 0..32 {
        let next = clean_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn plausible_path(p: &str) -> bool {
    !p.is_empty()
        && !p.starts_with('<')
        && !p.ends_with('/')
        && !p.chars().any(|c| c.is_control() || "<>\"|?*".contains(c))
}

/// Finds `(path, line)` pairs of Python tracebacks (`File "x.py", line 3`) and
/// `path.py:3:` style locations, in order of appearance. Frames whose line is
/// not a positive integer or whose path is a pseudo-file such as `<stdin>` are skipped.
pub fn extract_stack_frames(text: &str) -> Vec<StackFrame> {
    let mut found: Vec<(usize, StackFrame)> = Vec::new();
    for re in [&*PY_FRAME, &*COLON_FRAME] {
        for cap in re.captures_iter(text) {
            let path = cap[1].trim();
            let Ok(line) = cap[2].parse::<usize>() else {
                continue;
            };
            if line == 0 || !plausible_path(path) {
                continue;
            }
            found.push((
                cap.get(0).unwrap().start(),
                StackFrame {
                    path: path.replace('\\', "/"),
                    line,
                },
            ));
        }
    }
    found.sort_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, f)| f).collect()
}

/// Cleans an issue (HTML tags and entities, code fences, bullets, whitespace)
/// and extracts error messages, stack frames, code blocks and reproduction steps.
/// Normalizing the normalized text again yields the same text.
pub fn normalize_issue(raw: &str) -> IssueReport {
    let normalized = clean(raw);
    let mut report = IssueReport {
        raw: raw.to_string(),
        stack_frames: extract_stack_frames(&normalized),
        ..Default::default()
    };

    let mut in_code = false;
    let mut block = Vec::new();
    let mut in_repro_section = false;
    for line in normalized.split('\n') {
        if FENCE.is_match(line) {
            if in_code {
                report.code_blocks.push(block.join("\n"));
                block.clear();
            }
            in_code = !in_code;
            continue;
        }
        let trimmed = line.trim();
        if ERROR_LINE.is_match(trimmed) && !report.error_messages.iter().any(|m| m == trimmed) {
            report.error_messages.push(trimmed.to_string());
        }
        if in_code {
            block.push(line);
            continue;
        }
        if let Some(cap) = HEADING.captures(line) {
            if !NUMBERED.is_match(line) && !DASH_ITEM.is_match(line) {
                let title = cap.get(1).or(cap.get(2)).map_or("", |m| m.as_str());
                in_repro_section = REPRO_HEADING.is_match(title);
                continue;
            }
        }
        if let Some(cap) = NUMBERED.captures(line) {
            report.repro_steps.push(cap[1].trim().to_string());
        } else if in_repro_section {
            if let Some(cap) = DASH_ITEM.captures(line) {
                report.repro_steps.push(cap[1].trim().to_string());
            }
        }
    }
    if in_code && !block.is_empty() {
        report.code_blocks.push(block.join("\n"));
    }
    report.normalized = normalized;
    report
}
