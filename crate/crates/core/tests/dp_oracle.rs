//! DP against the exhaustive pattern oracle on random small instances,
//! plus window-budget monotonicity on random graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saw_core::dp::{bf_local_safety, local_safety};
use saw_core::graph::{OneStepGraph, Reachability};
use saw_core::grid::GridSet;

fn random_graph(rng: &mut ChaCha8Rng, total: usize, unsafe_rate: f64) -> OneStepGraph {
    let entries = (0..total)
        .map(|_| {
            [0, 1].map(|_| {
                if rng.gen::<f64>() < unsafe_rate {
                    Reachability::Unsafe
                } else {
                    let degree = 1 + (rng.gen::<u64>() % 3) as usize;
                    let ids = (0..degree).map(|_| rng.gen_range(0..total));
                    Reachability::Successors(GridSet::from_indices(total, ids))
                }
            })
        })
        .collect();
    OneStepGraph::from_entries(entries)
}

#[test]
fn dp_equals_pattern_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nontrivial = 0usize;
    for case in 0..200 {
        let total = rng.gen_range(2..=8);
        let unsafe_rate = [0.0, 0.1, 0.25, 0.5][case % 4];
        let g = random_graph(&mut rng, total, unsafe_rate);
        let window = rng.gen_range(1..=5);
        let budget = rng.gen_range(0..=window);

        let (gamma_s, gk) = local_safety(&g, budget, window);
        let (bf_s, bf_reach) = bf_local_safety(&g, budget, window).unwrap();

        assert_eq!(
            gamma_s, bf_s,
            "case {case}: gamma_s mismatch (n={total}, m={budget}, K={window})"
        );
        for v in 0..total {
            let dp_cell = gk.successors[v]
                .clone()
                .unwrap_or_else(|| GridSet::new(total));
            assert_eq!(
                dp_cell, bf_reach[v],
                "case {case}: DP(v={v},0,0) mismatch (n={total}, m={budget}, K={window})"
            );
        }
        if !gamma_s.is_empty() && gamma_s.count() < total {
            nontrivial += 1;
        }
    }
    // The random instances must actually exercise mixed outcomes.
    assert!(nontrivial > 25, "only {nontrivial} nontrivial cases");
}

#[test]
fn more_misses_never_grow_the_safe_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let total = rng.gen_range(3..=10);
        let g = random_graph(&mut rng, total, 0.2);
        let window = rng.gen_range(2..=6);
        let mut previous: Option<GridSet> = None;
        for budget in 0..=window {
            let (gamma_s, _) = local_safety(&g, budget, window);
            if let Some(prev) = &previous {
                assert!(
                    gamma_s.is_subset_of(prev),
                    "gamma_s grew from m={} to m={budget}",
                    budget - 1
                );
            }
            previous = Some(gamma_s);
        }
    }
}

#[test]
fn oracle_guards() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(&mut rng, 65, 0.1);
    assert!(bf_local_safety(&g, 1, 2).is_err());
    let g = random_graph(&mut rng, 8, 0.1);
    assert!(bf_local_safety(&g, 1, 7).is_err());
}
