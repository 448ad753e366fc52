use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use super::repo::{Language, SourceFile};
use crate::python;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefKind {
    Module,
    Class,
    Function,
    Method,
}

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn new(start: usize, end: usize) -> Self {
        LineSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub name: String,
    pub kind: DefKind,
    pub span: LineSpan,
    /// Names called anywhere inside the definition, nested bodies included.
    pub referenced_names: BTreeSet<String>,
    /// Index of the enclosing definition within the same outline.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileOutline {
    pub path: String,
    /// Definitions in source order (pre-order: a parent precedes its children).
    pub definitions: Vec<Definition>,
    /// Set when the file could not be parsed and the outline is a single module span.
    pub degraded: bool,
}

/// Outlines keyed by repo-relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxIndex {
    pub files: BTreeMap<String, FileOutline>,
}

impl SyntaxIndex {
    pub fn build<'a>(files: impl IntoIterator<Item = &'a SourceFile>) -> Self {
        SyntaxIndex {
            files: files
                .into_iter()
                .map(|f| (f.path.clone(), parse_outline(f)))
                .collect(),
        }
    }

    pub fn get(&self, path: &str) -> Option<&FileOutline> {
        self.files.get(path)
    }
}

fn degraded(file: &SourceFile) -> FileOutline {
    FileOutline {
        path: file.path.clone(),
        definitions: vec![Definition {
            name: file.path.clone(),
            kind: DefKind::Module,
            span: LineSpan::new(1, file.line_count.max(1)),
            referenced_names: BTreeSet::new(),
            parent: None,
        }],
        degraded: true,
    }
}

/// Extracts class, function and method definitions with their line spans and
/// called names. Non-Python or unparseable files get a degraded whole-file outline.
pub fn parse_outline(file: &SourceFile) -> FileOutline {
    if file.language != Language::Python {
        return degraded(file);
    }
    let Some(tree) = python::parse(&file.content) else {
        return degraded(file);
    };
    let root = tree.root_node();
    if root.has_error() {
        return degraded(file);
    }
    let mut definitions = Vec::new();
    collect(root, &file.content, None, &mut definitions);
    FileOutline {
        path: file.path.clone(),
        definitions,
        degraded: false,
    }
}

fn end_line(node: Node) -> usize {
    let end = node.end_position();
    if end.column == 0 && end.row > node.start_position().row {
        end.row
    } else {
        end.row + 1
    }
}

fn collect(node: Node, src: &str, parent: Option<usize>, out: &mut Vec<Definition>) {
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        let (outer, def) = match child.kind() {
            "decorated_definition" => match child.child_by_field_name("definition") {
                Some(d) => (child, d),
                None => continue,
            },
            "function_definition" | "class_definition" => (child, child),
            _ => {
                collect(child, src, parent, out);
                continue;
            }
        };
        let Some(name) = def.child_by_field_name("name") else {
            continue;
        };
        let kind = match def.kind() {
            "class_definition" => DefKind::Class,
            _ => match parent.map(|p| out[p].kind) {
                Some(DefKind::Class) if directly_in_class_body(outer) => DefKind::Method,
                _ => DefKind::Function,
            },
        };
        let mut referenced = BTreeSet::new();
        if let Some(body) = def.child_by_field_name("body") {
            called_names(body, src, &mut referenced);
        }
        let idx = out.len();
        out.push(Definition {
            name: python::node_text(name, src).to_string(),
            kind,
            span: LineSpan::new(outer.start_position().row + 1, end_line(outer)),
            referenced_names: referenced,
            parent,
        });
        if let Some(body) = def.child_by_field_name("body") {
            collect(body, src, Some(idx), out);
        }
    }
}

fn directly_in_class_body(node: Node) -> bool {
    node.parent()
        .filter(|b| b.kind() == "block")
        .and_then(|b| b.parent())
        .is_some_and(|c| c.kind() == "class_definition")
}

fn called_names(node: Node, src: &str, out: &mut BTreeSet<String>) {
    if node.kind() == "call" {
        if let Some(func) = node.child_by_field_name("function") {
            match func.kind() {
                "identifier" => {
                    out.insert(python::node_text(func, src).to_string());
                }
                "attribute" => {
                    if let Some(attr) = func.child_by_field_name("attribute") {
                        out.insert(python::node_text(attr, src).to_string());
                    }
                }
                _ => {}
            }
        }
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        called_names(child, src, out);
    }
}
