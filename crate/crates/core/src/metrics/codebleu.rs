//! CodeBLEU for Python: n-gram match, keyword-weighted n-gram match,
//! syntax subtree match and data-flow match, averaged with equal weights.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::harness::Patch;
use crate::{python, text};

pub const KEYWORD_WEIGHT: f64 = 5.0;
const MAX_N: usize = 4;

pub const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?|"(?:\\.|[^"\\\n])*"|'(?:\\.|[^'\\\n])*'|\*\*|//|==|!=|<=|>=|->|\S"#)
        .unwrap()
});

/// Lexical tokens of a code snippet: identifiers, numbers, string literals,
/// common two-character operators and single punctuation characters.
pub fn code_tokens(code: &str) -> Vec<&str> {
    TOKEN.find_iter(code).map(|m| m.as_str()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleu {
    pub bleu: f64,
    pub weighted_bleu: f64,
    pub ast: f64,
    pub dataflow: f64,
    pub score: f64,
}

fn ngrams<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    out
}

fn token_weight(t: &str) -> f64 {
    if PYTHON_KEYWORDS.contains(&t) {
        KEYWORD_WEIGHT
    } else {
        1.0
    }
}

/// Geometric mean of add-one smoothed clipped n-gram precisions for
/// n = 1..4, times the brevity penalty. With `weighted`, each n-gram counts
/// with the mean weight of its tokens.
fn bleu(cand: &[&str], reference: &[&str], weighted: bool) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_N {
        let c = ngrams(cand, n);
        let r = ngrams(reference, n);
        let mut matched = 0.0;
        let mut total = 0.0;
        for (gram, count) in &c {
            let w = if weighted {
                gram.iter().map(|t| token_weight(t)).sum::<f64>() / n as f64
            } else {
                1.0
            };
            let clipped = (*count).min(r.get(gram).copied().unwrap_or(0));
            matched += w * clipped as f64;
            total += w * *count as f64;
        }
        log_sum += ((matched + 1.0) / (total + 1.0)).ln();
    }
    let precision = (log_sum / MAX_N as f64).exp();
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * precision).clamp(0.0, 1.0)
}

fn subtrees(node: Node, out: &mut BTreeMap<String, usize>) {
    if node.named_child_count() > 0 {
        *out.entry(node.to_sexp()).or_insert(0) += 1;
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        subtrees(child, out);
    }
}

/// Share of the reference's subtrees of height two or more (compared by
/// node kinds only) that also occur in the candidate, with multiplicity.
fn ast_match(cand: Node, reference: Node) -> f64 {
    let (mut c, mut r) = (BTreeMap::new(), BTreeMap::new());
    subtrees(cand, &mut c);
    subtrees(reference, &mut r);
    let total: usize = r.values().sum();
    if total == 0 {
        return if c.is_empty() { 1.0 } else { 0.0 };
    }
    let matched: usize = r
        .iter()
        .map(|(k, n)| (*n).min(c.get(k).copied().unwrap_or(0)))
        .sum();
    matched as f64 / total as f64
}

type Flow = (usize, String, String);

struct FlowCollector<'s> {
    source: &'s str,
    names: HashMap<String, usize>,
    defs: HashMap<String, String>,
    flows: Vec<Flow>,
}

impl<'s> FlowCollector<'s> {
    fn name_id(&mut self, name: &str) -> usize {
        let next = self.names.len();
        *self.names.entry(name.to_string()).or_insert(next)
    }

    fn parent_kind(node: Node) -> String {
        node.parent().map_or("module", |p| p.kind()).to_string()
    }

    fn use_ident(&mut self, node: Node) {
        let name = python::node_text(node, self.source).to_string();
        let id = self.name_id(&name);
        if let Some(def_kind) = self.defs.get(&name) {
            self.flows
                .push((id, def_kind.clone(), Self::parent_kind(node)));
        }
    }

    fn def_ident(&mut self, node: Node, site: &str) {
        let name = python::node_text(node, self.source).to_string();
        self.name_id(&name);
        self.defs.insert(name, site.to_string());
    }

    /// Binds every plain name in an assignment target; attribute and
    /// subscript targets read their object and index instead.
    fn bind(&mut self, target: Node, site: &str) {
        match target.kind() {
            "identifier" => self.def_ident(target, site),
            "attribute" | "subscript" => self.visit(target),
            _ => {
                let mut cursor = target.walk();
                let children: Vec<Node> = target.named_children(&mut cursor).collect();
                for c in children {
                    self.bind(c, site);
                }
            }
        }
    }

    fn field_visit(&mut self, node: Node, field: &str) {
        if let Some(c) = node.child_by_field_name(field) {
            self.visit(c);
        }
    }

    fn visit(&mut self, node: Node) {
        let kind = node.kind();
        match kind {
            "identifier" => self.use_ident(node),
            "attribute" => self.field_visit(node, "object"),
            "keyword_argument" => self.field_visit(node, "value"),
            "assignment" | "augmented_assignment" => {
                self.field_visit(node, "right");
                if let Some(left) = node.child_by_field_name("left") {
                    if kind == "augmented_assignment" {
                        self.visit(left);
                    }
                    self.bind(left, kind);
                }
            }
            "for_statement" | "for_in_clause" => {
                self.field_visit(node, "right");
                if let Some(left) = node.child_by_field_name("left") {
                    self.bind(left, kind);
                }
                self.field_visit(node, "body");
                self.field_visit(node, "alternative");
            }
            "named_expression" => {
                self.field_visit(node, "value");
                if let Some(name) = node.child_by_field_name("name") {
                    self.bind(name, kind);
                }
            }
            "function_definition" | "class_definition" => {
                if let Some(name) = node.child_by_field_name("name") {
                    self.def_ident(name, kind);
                }
                let mut cursor = node.walk();
                let children: Vec<Node> = node.named_children(&mut cursor).collect();
                for c in children {
                    if Some(c) != node.child_by_field_name("name") {
                        self.visit(c);
                    }
                }
            }
            "parameters" | "lambda_parameters" => {
                let mut cursor = node.walk();
                let params: Vec<Node> = node.named_children(&mut cursor).collect();
                for p in params {
                    match p.kind() {
                        "identifier" => self.def_ident(p, "parameters"),
                        "default_parameter" | "typed_default_parameter" => {
                            self.field_visit(p, "value");
                            if let Some(n) = p.child_by_field_name("name") {
                                self.bind(n, "parameters");
                            }
                        }
                        _ => {
                            let mut c2 = p.walk();
                            let inner: Vec<Node> = p.named_children(&mut c2).collect();
                            for i in inner.into_iter().filter(|i| i.kind() == "identifier") {
                                self.def_ident(i, "parameters");
                            }
                        }
                    }
                }
            }
            "as_pattern" => {
                let mut cursor = node.walk();
                let children: Vec<Node> = node.named_children(&mut cursor).collect();
                for c in children {
                    if c.kind() == "as_pattern_target" {
                        self.bind(c, kind);
                    } else {
                        self.visit(c);
                    }
                }
            }
            "import_statement" | "import_from_statement" | "aliased_import" | "dotted_name" => {}
            _ => {
                let mut cursor = node.walk();
                let children: Vec<Node> = node.named_children(&mut cursor).collect();
                for c in children {
                    self.visit(c);
                }
            }
        }
    }
}

fn flows(root: Node, source: &str) -> BTreeMap<Flow, usize> {
    let mut fc = FlowCollector {
        source,
        names: HashMap::new(),
        defs: HashMap::new(),
        flows: Vec::new(),
    };
    fc.visit(root);
    let mut out = BTreeMap::new();
    for f in fc.flows {
        *out.entry(f).or_insert(0) += 1;
    }
    out
}

/// Multiset Jaccard similarity of def-use pairs. Variables are identified by
/// order of first appearance, so consistent renaming does not change the flows.
fn dataflow_match(cand: Node, cand_src: &str, reference: Node, ref_src: &str) -> f64 {
    let c = flows(cand, cand_src);
    let r = flows(reference, ref_src);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    let keys: std::collections::BTreeSet<&Flow> = c.keys().chain(r.keys()).collect();
    let (mut inter, mut union) = (0usize, 0usize);
    for k in keys {
        let (a, b) = (
            c.get(k).copied().unwrap_or(0),
            r.get(k).copied().unwrap_or(0),
        );
        inter += a.min(b);
        union += a.max(b);
    }
    inter as f64 / union as f64
}

/// CodeBLEU of `candidate` against `reference`. Both are dedented before
/// parsing; if either fails to parse cleanly, the syntax and data-flow
/// components are 0. BLEU is directional, so the score is not symmetric.
pub fn code_bleu(candidate: &str, reference: &str) -> CodeBleu {
    let (cand_src, ref_src) = (text::dedent(candidate), text::dedent(reference));
    let (ct, rt) = (code_tokens(&cand_src), code_tokens(&ref_src));
    let bleu_plain = bleu(&ct, &rt, false);
    let bleu_w = bleu(&ct, &rt, true);
    let trees = (python::parse(&cand_src), python::parse(&ref_src));
    let (ast, dataflow) = match trees {
        (Some(c), Some(r)) if !c.root_node().has_error() && !r.root_node().has_error() => (
            ast_match(c.root_node(), r.root_node()),
            dataflow_match(c.root_node(), &cand_src, r.root_node(), &ref_src),
        ),
        _ => (0.0, 0.0),
    };
    let parts = [
        bleu_plain,
        bleu_w,
        ast.clamp(0.0, 1.0),
        dataflow.clamp(0.0, 1.0),
    ];
    CodeBleu {
        bleu: parts[0],
        weighted_bleu: parts[1],
        ast: parts[2],
        dataflow: parts[3],
        score: 0.25 * parts.iter().sum::<f64>(),
    }
}

/// New-side code of every hunk in a diff, each hunk dedented on its own and
/// separated by a blank line. Unparseable diffs yield an empty string.
pub fn patch_new_code(diff: &str) -> String {
    let Ok(patch) = Patch::parse(diff) else {
        return String::new();
    };
    patch
        .hunks()
        .map(|h| {
            text::dedent(
                &h.new_side()
                    .map(|l| format!("{}\n", l.text))
                    .collect::<String>(),
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}
