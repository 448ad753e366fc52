//! Small text helpers shared across modules.

use sha2::{Digest, Sha256};

/// Length of `text` in whitespace-delimited tokens. This is the length unit
/// used for chunk budgets, context packing and generation limits.
pub fn unit_len(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Splits `text` into lines, each keeping its terminator.
pub fn lines_inclusive(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

/// Number of newline-delimited lines; a trailing newline does not open a new line.
pub fn line_count(text: &str) -> usize {
    text.split_inclusive('\n').count()
}

/// Hex SHA-256 of `text`, truncated to `len` hex chars.
pub fn short_digest(text: &str, len: usize) -> String {
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    digest[..len.min(digest.len())].to_string()
}

/// Removes the longest common leading whitespace from all non-blank lines.
pub fn dedent(text: &str) -> String {
    let indent = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    text.split_inclusive('\n')
        .map(|l| {
            if l.trim().is_empty() {
                l.trim_start_matches([' ', '\t'])
            } else {
                &l[indent.min(l.len())..]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_count_ignores_trailing_newline() {
        assert_eq!(line_count(""), 0);
        assert_eq!(line_count("a"), 1);
        assert_eq!(line_count("a\nb"), 2);
        assert_eq!(line_count("a\nb\n"), 2);
        assert_eq!(line_count("\n\n"), 2);
    }

    #[test]
    fn units_are_whitespace_tokens() {
        assert_eq!(unit_len("  def f(x):\n\treturn x  "), 4);
        assert_eq!(unit_len(""), 0);
    }

    #[test]
    fn dedent_strips_common_indent() {
        assert_eq!(dedent("    a = 1\n      b\n\n    c\n"), "a = 1\n  b\n\nc\n");
    }
}
