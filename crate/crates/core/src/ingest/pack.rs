use serde::{Deserialize, Serialize};

use crate::text::unit_len;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    IssueSection,
    ErrorMessage,
    Chunk,
    StackFrame,
}

/// Static importance weights per item source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightTable {
    pub stack_frame: f64,
    pub error_message: f64,
    pub issue_body: f64,
    pub code_chunk: f64,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable {
            stack_frame: 1.0,
            error_message: 0.9,
            issue_body: 0.7,
            code_chunk: 0.5,
        }
    }
}

impl WeightTable {
    pub fn weight(&self, source: ItemSource) -> f64 {
        match source {
            ItemSource::StackFrame => self.stack_frame,
            ItemSource::ErrorMessage => self.error_message,
            ItemSource::IssueSection => self.issue_body,
            ItemSource::Chunk => self.code_chunk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub source: ItemSource,
    pub text: String,
    pub weight: f64,
    /// In `[0, 1]`.
    pub relevance: f64,
}

impl ContextItem {
    pub fn new(source: ItemSource, text: impl Into<String>, weight: f64, relevance: f64) -> Self {
        ContextItem {
            source,
            text: text.into(),
            weight,
            relevance,
        }
    }

    pub fn score(&self) -> f64 {
        self.weight * self.relevance
    }

    pub fn units(&self) -> usize {
        unit_len(&self.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PackedContext {
    /// Sorted by descending score.
    pub items: Vec<ContextItem>,
    pub budget: usize,
    pub used: usize,
}

impl PackedContext {
    pub fn total_score(&self) -> f64 {
        self.items.iter().map(ContextItem::score).sum()
    }

    /// Plain-text rendering for a prompt.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            let label = match item.source {
                ItemSource::IssueSection => "issue",
                ItemSource::ErrorMessage => "error",
                ItemSource::Chunk => "code",
                ItemSource::StackFrame => "frame",
            };
            out.push_str(&format!("[{label}]\n{}\n\n", item.text.trim_end()));
        }
        out
    }
}

/// Selects whole items under a budget of `budget` whitespace tokens.
///
/// Items are taken greedily by score per unit (zero-length items first),
/// skipping those that no longer fit. The result is compared against the best
/// single item that fits and the better of the two is kept, which bounds the
/// loss against the optimal selection by a factor of two.
pub fn pack_context(candidates: &[ContextItem], budget: usize) -> PackedContext {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let density = |i: usize| {
        let u = candidates[i].units();
        if u == 0 {
            f64::INFINITY
        } else {
            candidates[i].score() / u as f64
        }
    };
    order.sort_by(|&a, &b| density(b).total_cmp(&density(a)).then(a.cmp(&b)));

    let mut greedy = Vec::new();
    let mut used = 0;
    for i in order {
        let u = candidates[i].units();
        if used + u <= budget {
            used += u;
            greedy.push(i);
        }
    }
    let greedy_score: f64 = greedy.iter().map(|&i| candidates[i].score()).sum();
    let best_single = (0..candidates.len())
        .filter(|&i| candidates[i].units() <= budget)
        .max_by(|&a, &b| {
            candidates[a]
                .score()
                .total_cmp(&candidates[b].score())
                .then(b.cmp(&a))
        });

    let mut chosen = match best_single {
        Some(i) if candidates[i].score() > greedy_score => vec![i],
        _ => greedy,
    };
    chosen.sort_by(|&a, &b| {
        candidates[b]
            .score()
            .total_cmp(&candidates[a].score())
            .then(a.cmp(&b))
    });
    let items: Vec<ContextItem> = chosen.iter().map(|&i| candidates[i].clone()).collect();
    PackedContext {
        used: items.iter().map(ContextItem::units).sum(),
        items,
        budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(score: f64, len: usize) -> ContextItem {
        let text = vec!["w"; len].join(" ");
        ContextItem::new(ItemSource::Chunk, text, 1.0, score)
    }

    #[test]
    fn exact_fit() {
        let p = pack_context(&[item(0.5, 10)], 10);
        assert_eq!(p.items.len(), 1);
        assert_eq!(p.used, 10);
    }

    #[test]
    fn higher_score_wins_equal_lengths() {
        let p = pack_context(&[item(0.8, 10), item(0.9, 10)], 10);
        assert_eq!(p.items.len(), 1);
        assert_eq!(p.items[0].relevance, 0.9);
    }

    #[test]
    fn zero_budget_is_empty() {
        let p = pack_context(&[item(0.8, 1)], 0);
        assert!(p.items.is_empty());
        assert_eq!(p.used, 0);
    }

    #[test]
    fn best_single_beats_dense_small_item() {
        // Greedy by density takes the 1-unit item and then nothing fits.
        let p = pack_context(&[item(0.1, 1), item(0.9, 10)], 10);
        assert_eq!(p.items.len(), 1);
        assert_eq!(p.items[0].relevance, 0.9);
    }

    #[test]
    fn output_sorted_by_score() {
        let p = pack_context(&[item(0.2, 1), item(0.9, 5), item(0.5, 2)], 100);
        let scores: Vec<f64> = p.items.iter().map(|i| i.score()).collect();
        assert_eq!(scores, [0.9, 0.5, 0.2]);
    }
}
