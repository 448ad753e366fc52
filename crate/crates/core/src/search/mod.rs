//! Monte Carlo tree search over hunk-level patch edits.

mod env;
mod filter;
mod tree;

pub use env::{assemble_patch, first_hunk, PatchEnv};
pub use filter::{tiered_filter, FilterStage, FilteredCandidate};
pub use tree::{merge_actions, uct_score, Action, Edge, Node, SearchTree, UctParams};

use serde::{Deserialize, Serialize};

use crate::harness::Tier;
use crate::policy::Mode;
use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub c1: f64,
    pub beta: f64,
    /// Samples drawn per expansion (K).
    pub expansions: usize,
    pub iterations: usize,
    pub max_depth: usize,
    /// Generation limit for rollouts, in whitespace tokens.
    pub simulation_budget: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            c1: 1.4,
            beta: 1.0,
            expansions: 3,
            iterations: 16,
            max_depth: 3,
            simulation_budget: 512,
            temperature: 0.6,
            top_p: 0.95,
            mode: Mode::NonThinking,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let positive = [
            ("c1", self.c1 > 0.0),
            ("beta", self.beta >= 0.0),
            ("expansions", self.expansions > 0),
            ("iterations", self.iterations > 0),
            ("max_depth", self.max_depth > 0),
            ("simulation_budget", self.simulation_budget > 0),
            ("temperature", self.temperature >= 0.0),
            ("top_p", self.top_p > 0.0 && self.top_p <= 1.0),
        ];
        match positive.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(SearchError::Config(format!("{name} out of range"))),
            None => Ok(()),
        }
    }

    pub fn uct(&self) -> UctParams {
        UctParams {
            c1: self.c1,
            beta: self.beta,
        }
    }
}

/// A scored complete candidate produced by a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub patch: String,
    pub reward: f64,
    pub tier: Tier,
}

impl Rollout {
    pub fn failed() -> Self {
        Rollout {
            patch: String::new(),
            reward: 0.0,
            tier: Tier::Invalid,
        }
    }
}

/// The problem the search runs on.
pub trait SearchEnv {
    /// Candidate next edits after `state`, with priors. Empty when nothing
    /// could be proposed.
    fn expand(&mut self, state: &[Action], k: usize) -> Vec<Action>;
    /// Completes `state` into a full candidate and scores it.
    fn simulate(&mut self, state: &[Action]) -> Rollout;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub depth: usize,
    /// Digest of the last action on the path; empty at the root.
    pub action: String,
    pub path: Vec<String>,
    pub tier: Tier,
    pub reward: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub patch: String,
    pub reward: f64,
    pub tier: Tier,
    /// Iteration (1-based) that first produced it.
    pub iteration: usize,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Highest-reward complete candidate, earliest on ties. `None` when no
    /// rollout produced a patch.
    pub best: Option<Candidate>,
    pub trace: Vec<TraceRecord>,
    pub tree: SearchTree,
}

impl SearchOutcome {
    pub fn resolved(&self) -> bool {
        self.best.as_ref().is_some_and(|b| b.tier == Tier::FullPass)
    }

    pub fn best_patch(&self) -> &str {
        self.best.as_ref().map_or("", |b| b.patch.as_str())
    }
}

pub fn action_digest(a: &Action) -> String {
    text::short_digest(&a.edit_text, 12)
}

/// Runs `cfg.iterations` rounds of select, expand, simulate and
/// backpropagate from an empty root.
///
/// A leaf below `max_depth` is expanded when reached and the first selected
/// child is simulated; a leaf at `max_depth` is simulated in place. Each node
/// keeps its first rollout reward and reuses it on later visits, since
/// rollouts are greedy. A node whose expansion yields nothing is terminal and
/// scores 0.
pub fn run_search(
    env: &mut dyn SearchEnv,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    cfg.validate()?;
    let params = cfg.uct();
    let mut tree = SearchTree::default();
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut best: Option<Candidate> = None;
    for iteration in 1..=cfg.iterations {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut node = SearchTree::ROOT;
        loop {
            let n = tree.node(node);
            if n.terminal {
                break;
            }
            if !n.expanded {
                if n.depth >= cfg.max_depth || (n.depth > 0 && n.rollout.is_none()) {
                    break;
                }
                let state = tree.actions_to(node);
                let actions = merge_actions(env.expand(&state, cfg.expansions));
                tree.expand(node, actions);
                if tree.node(node).terminal {
                    break;
                }
            }
            let edge = tree
                .select(node, params)
                .expect("expanded non-terminal node has edges");
            path.push((node, edge));
            node = tree.node(node).edges[edge].child;
            if tree.node(node).rollout.is_none() {
                break;
            }
        }
        if path.is_empty() {
            tracing::warn!(iteration, "root has no actions; stopping search");
            break;
        }
        let leaf = tree.node(node);
        let (reward, tier) = if leaf.terminal {
            (0.0, Tier::Invalid)
        } else if let Some(cached) = leaf.rollout {
            cached
        } else {
            let state = tree.actions_to(node);
            let rollout = env.simulate(&state);
            let reward = rollout.reward.clamp(0.0, 1.0);
            tree.nodes[node].rollout = Some((reward, rollout.tier));
            if !rollout.patch.is_empty() && best.as_ref().is_none_or(|b| reward > b.reward) {
                best = Some(Candidate {
                    patch: rollout.patch.clone(),
                    reward,
                    tier: rollout.tier,
                    iteration,
                    actions: state,
                });
            }
            (reward, rollout.tier)
        };
        tree.backpropagate(&path, reward);
        let actions: Vec<String> = tree.actions_to(node).iter().map(action_digest).collect();
        trace.push(TraceRecord {
            iteration,
            depth: tree.node(node).depth,
            action: actions.last().cloned().unwrap_or_default(),
            path: actions,
            tier,
            reward,
            best_so_far: best.as_ref().map_or(0.0, |b| b.reward),
        });
    }
    Ok(SearchOutcome { best, trace, tree })
}
