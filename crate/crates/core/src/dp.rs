//! Dynamic program over (grid, misses-used, step) computing the local
//! safety set and the K-step graph.
//!
//! `DP(v, n, k)` is the set of grids reachable at step `K` from grid `v` at
//! step `k` with `n` misses already used, provided every admissible
//! continuation stays classifiable; the cell is empty exactly when some
//! admissible miss pattern from `(v, n, k)` runs into an unsafe
//! classification. Misses are adversarial: an unsafe option under any
//! admissible event empties the cell even if the other event is fine.
//!
//! Only two k-layers are live at a time, and set unions are word-parallel
//! bit-vector ORs.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{OneStepGraph, Reachability};
use crate::grid::GridSet;
use crate::oracle::enumerate_patterns;
use crate::reach::MissEvent;

/// K-step reachability graph: successors are `DP(v, 0, 0)` for the locally
/// safe grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KStepGraph {
    /// Indexed by grid id; `None` outside the locally safe set.
    pub successors: Vec<Option<GridSet>>,
    pub edge_count: u64,
    /// Number of locally safe grids (start region).
    pub start_size: usize,
    /// Size of the union of all successor sets (end region).
    pub end_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OracleGuard {
    #[error("brute-force oracle supports at most 64 grids")]
    TooManyGrids,
    #[error("brute-force oracle supports K <= 6")]
    WindowTooLarge,
}

/// One DP cell: union of successor cells over admissible events, empty when
/// any admissible continuation is unsafe.
fn transition(
    g1: &OneStepGraph,
    next_layer: &[GridSet],
    total: usize,
    budget: usize,
    grid: usize,
    used: usize,
) -> GridSet {
    let mut acc = GridSet::new(total);
    for event in MissEvent::BOTH {
        let n = used + event.index();
        if n > budget {
            continue;
        }
        let successors = match g1.entry(grid, event) {
            Reachability::Unsafe => return GridSet::new(total),
            Reachability::Successors(s) => s,
        };
        if successors.is_empty() {
            return GridSet::new(total);
        }
        for w in successors.iter() {
            let cell = &next_layer[w * (budget + 1) + n];
            if cell.is_empty() {
                return GridSet::new(total);
            }
            acc.union_with(cell);
        }
    }
    acc
}

/// Runs the DP and returns the locally safe set together with the K-step
/// graph built from `DP(v, 0, 0)`.
pub fn local_safety(g1: &OneStepGraph, budget: usize, window: usize) -> (GridSet, KStepGraph) {
    assert!(budget <= window, "miss budget exceeds window");
    assert!(window >= 1);
    let total = g1.total_grids();
    let lanes = budget + 1;

    // Layer k = K: DP(v, n, K) = {v}.
    let mut next: Vec<GridSet> = (0..total * lanes)
        .map(|cell| GridSet::from_indices(total, [cell / lanes]))
        .collect();

    for _k in (0..window).rev() {
        let layer: Vec<GridSet> = (0..total)
            .into_par_iter()
            .flat_map_iter(|grid| {
                let next_ref = &next;
                (0..lanes).map(move |used| transition(g1, next_ref, total, budget, grid, used))
            })
            .collect();
        next = layer;
    }

    let mut gamma_s = GridSet::new(total);
    let mut successors: Vec<Option<GridSet>> = vec![None; total];
    let mut edge_count = 0u64;
    let mut end_region = GridSet::new(total);
    for grid in 0..total {
        let cell = &next[grid * lanes];
        if !cell.is_empty() {
            gamma_s.insert(grid);
            edge_count += cell.count() as u64;
            end_region.union_with(cell);
            successors[grid] = Some(cell.clone());
        }
    }
    let k_graph = KStepGraph {
        successors,
        edge_count,
        start_size: gamma_s.count(),
        end_size: end_region.count(),
    };
    (gamma_s, k_graph)
}

/// Independent brute-force oracle: enumerates every admissible miss pattern
/// and propagates frontiers through the one-step graph. A grid is locally
/// safe iff every pattern's every step stays classifiable; its reachable
/// set is the union of all final frontiers.
pub fn bf_local_safety(
    g1: &OneStepGraph,
    budget: usize,
    window: usize,
) -> Result<(GridSet, Vec<GridSet>), OracleGuard> {
    let total = g1.total_grids();
    if total > 64 {
        return Err(OracleGuard::TooManyGrids);
    }
    if window > 6 {
        return Err(OracleGuard::WindowTooLarge);
    }
    let patterns = enumerate_patterns(budget, window).expect("guarded above");

    let mut gamma_s = GridSet::new(total);
    let mut reach = vec![GridSet::new(total); total];
    #[allow(clippy::needless_range_loop)]
    'grids: for start in 0..total {
        let mut reachable = GridSet::new(total);
        for pattern in &patterns {
            let mut frontier = GridSet::from_indices(total, [start]);
            for &bit in pattern {
                let event = if bit == 0 { MissEvent::Meet } else { MissEvent::Miss };
                let mut next = GridSet::new(total);
                for v in frontier.iter() {
                    match g1.entry(v, event) {
                        Reachability::Unsafe => continue 'grids,
                        Reachability::Successors(s) if s.is_empty() => continue 'grids,
                        Reachability::Successors(s) => next.union_with(s),
                    }
                }
                frontier = next;
            }
            reachable.union_with(&frontier);
        }
        gamma_s.insert(start);
        reach[start] = reachable;
    }
    Ok((gamma_s, reach))
}
