use serde::{Deserialize, Serialize};

use crate::harness::Tier;

/// One statement-level edit: the rendered diff of a single hunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub edit_text: String,
    /// Policy probability of this edit, in `(0, 1]`.
    pub prior: f64,
    /// Entropy-based confidence of the generated tokens, when logprobs were available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Action {
    pub fn new(edit_text: impl Into<String>, prior: f64) -> Self {
        Action {
            edit_text: edit_text.into(),
            prior,
            confidence: None,
        }
    }
}

/// Folds actions with identical text into one, summing priors (capped at 1)
/// and keeping the first occurrence's position and confidence.
pub fn merge_actions(actions: Vec<Action>) -> Vec<Action> {
    let mut out: Vec<Action> = Vec::new();
    for a in actions {
        if a.edit_text.trim().is_empty() || !(a.prior.is_finite() && a.prior > 0.0) {
            continue;
        }
        match out.iter_mut().find(|o| o.edit_text == a.edit_text) {
            Some(o) => o.prior = (o.prior + a.prior).min(1.0),
            None => out.push(Action {
                prior: a.prior.min(1.0),
                ..a
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub action: Action,
    pub visits: u64,
    pub q: f64,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub parent: Option<usize>,
    pub depth: usize,
    /// N(s): passes through this node's edges.
    pub visits: u64,
    pub edges: Vec<Edge>,
    pub expanded: bool,
    /// Set when expansion produced nothing; the node then always scores 0.
    pub terminal: bool,
    /// Reward and tier of this node's own rollout, reused on later visits.
    pub rollout: Option<(f64, Tier)>,
}

impl Node {
    fn new(parent: Option<usize>, depth: usize) -> Self {
        Node {
            parent,
            depth,
            visits: 0,
            edges: Vec::new(),
            expanded: false,
            terminal: false,
            rollout: None,
        }
    }
}

/// Exploration settings consumed by [`select`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UctParams {
    pub c1: f64,
    pub beta: f64,
}

/// `Q + c1 * sqrt(ln N(s) / N(s,a)) + beta * ln P`, infinite for an unvisited edge.
pub fn uct_score(edge: &Edge, parent_visits: u64, params: UctParams) -> f64 {
    if edge.visits == 0 {
        return f64::INFINITY;
    }
    let explore = ((parent_visits.max(1) as f64).ln() / edge.visits as f64).sqrt();
    edge.q + params.c1 * explore + params.beta * edge.action.prior.ln()
}

/// Arena-backed search tree rooted at node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub nodes: Vec<Node>,
}

impl Default for SearchTree {
    fn default() -> Self {
        SearchTree {
            nodes: vec![Node::new(None, 0)],
        }
    }
}

impl SearchTree {
    pub const ROOT: usize = 0;

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Attaches one edge per action below `node` and marks it expanded.
    pub fn expand(&mut self, node: usize, actions: Vec<Action>) {
        let depth = self.nodes[node].depth + 1;
        for action in actions {
            let child = self.nodes.len();
            self.nodes.push(Node::new(Some(node), depth));
            self.nodes[node].edges.push(Edge {
                action,
                visits: 0,
                q: 0.0,
                child,
            });
        }
        self.nodes[node].expanded = true;
        if self.nodes[node].edges.is_empty() {
            self.nodes[node].terminal = true;
        }
    }

    /// Index of the edge to follow from `node`: unvisited edges first
    /// (highest prior, then insertion order), otherwise the highest UCT score
    /// with ties going to the earlier edge. `None` when there are no edges.
    pub fn select(&self, node: usize, params: UctParams) -> Option<usize> {
        let n = &self.nodes[node];
        let unvisited = n
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.visits == 0)
            .fold(None::<(usize, f64)>, |best, (i, e)| match best {
                Some((_, p)) if p >= e.action.prior => best,
                _ => Some((i, e.action.prior)),
            });
        if let Some((i, _)) = unvisited {
            return Some(i);
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in n.edges.iter().enumerate() {
            let s = uct_score(e, n.visits, params);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Credits `reward` to every `(node, edge)` on `path`: the edge count is
    /// incremented first, then `Q += (R - Q) / N(s,a)`; the node count follows
    /// so that `N(s)` stays the sum of its edge counts.
    pub fn backpropagate(&mut self, path: &[(usize, usize)], reward: f64) {
        for &(node, edge) in path {
            let n = &mut self.nodes[node];
            let e = &mut n.edges[edge];
            e.visits += 1;
            e.q += (reward - e.q) / e.visits as f64;
            n.visits += 1;
        }
    }

    /// Actions from the root down to `node`.
    pub fn actions_to(&self, node: usize) -> Vec<Action> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(parent) = self.nodes[cur].parent {
            let edge = self.nodes[parent]
                .edges
                .iter()
                .find(|e| e.child == cur)
                .expect("child is linked from its parent");
            out.push(edge.action.clone());
            cur = parent;
        }
        out.reverse();
        out
    }
}
