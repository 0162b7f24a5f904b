//! Safe-initial-set computation for weakly-hard sampled-data control systems.
//!
//! Given a nonlinear sampled-data system under an (m, K) deadline-miss
//! constraint and a safe box, the pipeline partitions the safe set into
//! grids, builds a one-step reachability graph with a built-in validated
//! integrator, runs a dynamic program over miss patterns to find the locally
//! safe grids, and extracts the largest closed subgraph — the grid union
//! from which the system provably never leaves the safe set.

pub mod dp;
pub mod expr;
pub mod graph;
pub mod grid;
pub mod inductive;
pub mod interval;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod reach;
pub mod report;
pub mod scalar;

pub use scalar::Scalar;

/// Concrete aliases for the default double-precision instantiation.
pub type Interval64 = interval::Interval<f64>;
pub type BoxRegion64 = interval::BoxRegion<f64>;
pub type Expr64 = expr::Expr<f64>;
pub type Model64 = model::Model<f64>;
pub type Flowpipe64 = reach::Flowpipe<f64>;
