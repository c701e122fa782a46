//! Homology signatures and multi-class spatio-temporal search.
//!
//! The lattice has spacing `dr/4`, and every move spans one time layer with
//! offsets `(±3, ±3)`, `(±4, 0)` or `(0, ±4)`, so straight and diagonal moves
//! have nearly equal length. Each search state carries the parity of its
//! crossings with the map's rays, which separates paths by ℤ₂-homology class.

pub(crate) mod astar;
mod lattice;
mod path;
mod search;
mod signature;

use thiserror::Error;

pub(crate) use lattice::LatticeMask;
pub use lattice::{
    move_length, segment_free, snap_to_lattice, successors, vertex_free, DiscretizationParams,
    SpacetimeVertex, MOVES,
};
pub use path::{edge_cost, SpacetimePath};
pub use search::{
    find_topological_paths, find_topological_paths_with, snap_endpoints, SearchLimits, TopologicalPaths,
};
pub use signature::{accumulate_segment, polyline_signature, segment_signature, H2Signature};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopoError {
    #[error("signature lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("goal is unreachable from start")]
    Unreachable,
    #[error("no free lattice point near the {0}")]
    InvalidEndpoint(&'static str),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Largest edge speed over `v_max` for the lattice moves.
pub fn max_speed_ratio() -> f64 {
    MOVES
        .iter()
        .map(|&(dx, dy)| ((dx * dx + dy * dy) as f64).sqrt() / 4.0)
        .fold(0.0, f64::max)
}
