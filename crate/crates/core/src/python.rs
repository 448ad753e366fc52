//! Thin wrapper over the tree-sitter Python grammar.

use tree_sitter::{Node, Parser, Tree};

/// Parses Python source. Returns `None` only if tree-sitter itself gives up
/// (cancellation or no language), which does not happen for valid UTF-8 input.
pub fn parse(source: &str) -> Option<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar is compatible with the linked tree-sitter");
    parser.parse(source, None)
}

/// A syntax error location, 1-based line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxFault {
    pub line: usize,
    pub message: String,
}

/// First error or missing node in document order, if the source does not parse
/// cleanly. The grammar accepts a compound statement whose body is not
/// indented (an empty block); that is reported too.
pub fn first_syntax_fault(source: &str) -> Option<SyntaxFault> {
    let tree = match parse(source) {
        Some(t) => t,
        None => {
            return Some(SyntaxFault {
                line: 1,
                message: "parser failed".into(),
            })
        }
    };
    let root = tree.root_node();
    if !root.has_error() {
        return empty_block(root);
    }
    find_fault(root).or(Some(SyntaxFault {
        line: root.start_position().row + 1,
        message: "syntax error".into(),
    }))
}

fn find_fault(node: Node) -> Option<SyntaxFault> {
    if node.is_missing() {
        return Some(SyntaxFault {
            line: node.start_position().row + 1,
            message: format!("missing `{}`", node.kind()),
        });
    }
    if node.is_error() {
        return Some(SyntaxFault {
            line: node.start_position().row + 1,
            message: "unexpected syntax".into(),
        });
    }
    if !node.has_error() {
        return None;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if let Some(f) = find_fault(child) {
            return Some(f);
        }
    }
    None
}

fn empty_block(node: Node) -> Option<SyntaxFault> {
    let mut cursor = node.walk();
    if node.kind() == "block"
        && !node
            .named_children(&mut cursor)
            .any(|c| c.kind() != "comment")
    {
        return Some(SyntaxFault {
            line: node.start_position().row + 1,
            message: "expected an indented block".into(),
        });
    }
    let mut cursor = node.walk();
    let found = node.named_children(&mut cursor).find_map(empty_block);
    found
}

/// Text of a node.
pub fn node_text<'a>(node: Node, source: &'a str) -> &'a str {
    &source[node.byte_range()]
}
