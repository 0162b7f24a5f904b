//! Inductiveness: the largest closed subgraph of the K-step graph inside
//! the locally safe set.
//!
//! Starting from the unsafe complement, any grid with a K-step successor in
//! the unsafe set is absorbed until a fixed point is reached — a breadth
//! first search over the reversed K-step graph. What remains is the largest
//! set that the K-step relation maps into itself.

use std::collections::VecDeque;

use crate::dp::KStepGraph;
use crate::grid::GridSet;

/// Returns the largest `S ⊆ gamma_s` with all K-step successors of `S`
/// inside `S`.
pub fn inductiveness(gk: &KStepGraph, gamma_s: &GridSet, total: usize) -> GridSet {
    // Reversed adjacency, materialized once as one bit row per target grid.
    let mut reversed: Vec<GridSet> = vec![GridSet::new(total); total];
    for v in gamma_s.iter() {
        if let Some(succ) = &gk.successors[v] {
            for w in succ.iter() {
                reversed[w].insert(v);
            }
        }
    }

    let mut absorbed = gamma_s.complement();
    let mut queue: VecDeque<usize> = absorbed.iter().collect();
    while let Some(w) = queue.pop_front() {
        for v in reversed[w].iter() {
            if absorbed.insert(v) {
                queue.push_back(v);
            }
        }
    }
    absorbed.complement()
}
