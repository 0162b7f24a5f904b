//! One-step reachability graph over the grid partition.
//!
//! For every grid and both deadline events the flowpipe over one sampling
//! period is computed; a grid whose pipe cannot be enclosed or leaves the
//! safe box is classified unsafe for that event, otherwise its successor
//! set is every grid the end-of-period box touches. Per-(grid, event) tasks
//! are independent and run on the ambient rayon pool; results land in a
//! pre-sized table so the graph is identical for any worker count.

use rayon::prelude::*;

use crate::grid::{grid_box, grids_overlapping_interior, GridSet};
use crate::interval::BoxRegion;
use crate::model::Model;
use crate::reach::{MissEvent, ReachEngine};
use crate::scalar::Scalar;

/// Classification of one `(grid, event)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reachability {
    /// Flowpipe failed or touched the complement of the safe box.
    Unsafe,
    /// Grids the end-of-period box overlaps.
    Successors(GridSet),
}

impl Reachability {
    pub fn successors(&self) -> Option<&GridSet> {
        match self {
            Reachability::Unsafe => None,
            Reachability::Successors(s) => Some(s),
        }
    }
}

/// The labeled one-step graph: one entry per grid and event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneStepGraph {
    entries: Vec<[Reachability; 2]>,
    edge_count: u64,
}

impl OneStepGraph {
    pub fn from_entries(entries: Vec<[Reachability; 2]>) -> Self {
        let edge_count = entries
            .iter()
            .flat_map(|pair| pair.iter())
            .map(|r| r.successors().map_or(0, |s| s.count() as u64))
            .sum();
        OneStepGraph {
            entries,
            edge_count,
        }
    }

    pub fn total_grids(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, grid: usize, event: MissEvent) -> &Reachability {
        &self.entries[grid][event.index()]
    }

    /// Total number of labeled edges `(v, e, v')`.
    pub fn edge_count(&self) -> u64 {
        self.edge_count
    }
}

fn within_safe<S: Scalar>(region: &BoxRegion<S>, model: &Model<S>, tol: &[S]) -> bool {
    (0..model.state_dim).all(|j| {
        region[j].lo >= model.safe_box[j].lo - tol[j]
            && region[j].hi <= model.safe_box[j].hi + tol[j]
    })
}

fn classify<S: Scalar>(
    engine: &ReachEngine<'_, S>,
    model: &Model<S>,
    tol: &[S],
    grid: usize,
    event: MissEvent,
) -> Reachability {
    let start = grid_box(model, grid);
    let pipe = match engine.flowpipe(&start, event) {
        Ok(p) => p,
        Err(_) => return Reachability::Unsafe,
    };
    for (_, segment) in &pipe.segments {
        if !within_safe(segment, model, tol) {
            return Reachability::Unsafe;
        }
    }
    Reachability::Successors(grids_overlapping_interior(model, &pipe.end_box))
}

/// Builds the one-step graph; `progress(done, total)` is invoked after each
/// grid finishes (from worker threads).
pub fn build_one_step<S: Scalar>(
    engine: &ReachEngine<'_, S>,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> OneStepGraph {
    let model = engine.model;
    let total = model.total_grids();
    let tol = model.safe_tolerance();
    let done = std::sync::atomic::AtomicUsize::new(0);

    let entries: Vec<[Reachability; 2]> = (0..total)
        .into_par_iter()
        .map(|grid| {
            let pair = [
                classify(engine, model, &tol, grid, MissEvent::Meet),
                classify(engine, model, &tol, grid, MissEvent::Miss),
            ];
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(k, total);
            pair
        })
        .collect();

    OneStepGraph::from_entries(entries)
}
