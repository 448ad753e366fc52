use serde::{Deserialize, Serialize};

use crate::ingest::{DefKind, Definition, SyntaxIndex};

/// A definition together with the file it lives in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocatedDef {
    pub path: String,
    pub def: Definition,
}

/// Orders the functions and methods of `top_files` so that callees come
/// before their callers.
///
/// Candidates are the function and method definitions of each file (a
/// degraded file contributes its whole-module span). `A` calls `B` when
/// `B`'s name appears in `A`'s called names; self-calls are ignored. Among
/// definitions whose callees are all placed, the one earliest in (file order,
/// span start) goes next. If none is free the remaining graph has a cycle:
/// the definition with the fewest unplaced callees (then earliest) has its
/// remaining dependencies dropped and is placed.
pub fn rank_functions(top_files: &[String], outlines: &SyntaxIndex) -> Vec<LocatedDef> {
    let mut nodes: Vec<LocatedDef> = Vec::new();
    for path in top_files {
        let Some(outline) = outlines.get(path) else {
            continue;
        };
        for def in &outline.definitions {
            if matches!(
                def.kind,
                DefKind::Function | DefKind::Method | DefKind::Module
            ) {
                nodes.push(LocatedDef {
                    path: path.clone(),
                    def: def.clone(),
                });
            }
        }
    }
    let n = nodes.len();
    // callees[a] = nodes a calls; callers[b] = nodes calling b.
    let mut callees: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut callers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            if a != b && nodes[a].def.referenced_names.contains(&nodes[b].def.name) {
                callees[a].push(b);
                callers[b].push(a);
            }
        }
    }
    let mut pending: Vec<usize> = callees.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .filter(|&i| !placed[i] && pending[i] == 0)
            .min()
            .or_else(|| {
                (0..n)
                    .filter(|&i| !placed[i])
                    .min_by_key(|&i| (pending[i], i))
            })
            .expect("an unplaced node exists");
        placed[next] = true;
        pending[next] = 0;
        order.push(next);
        for &c in &callers[next] {
            if !placed[c] {
                pending[c] -= 1;
            }
        }
    }
    let mut slots: Vec<Option<LocatedDef>> = nodes.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|i| slots[i].take().expect("placed once"))
        .collect()
}
