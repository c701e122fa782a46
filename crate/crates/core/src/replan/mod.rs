//! Short-horizon occupancy prediction and class-preserving replanning.

mod occupancy;
mod planner;

use thiserror::Error;

pub use occupancy::{
    merge_fields, occupancy_edge_cost, predict_agent, predict_occupancy, DiffusionKernel, Observation, OccupancyField, EDGE_SAMPLES,
};
pub use planner::{path_occupancy_cost, replan, ReplanResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplanError {
    #[error("no path in the reference class within the search limits ({expansions} expansions)")]
    ReplanFailed { expansions: usize },
    #[error("reference path is empty")]
    EmptyReference,
    #[error("prefix signature length does not match the map")]
    SignatureLength,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanParams {
    /// Heuristic weight in (0, 1].
    pub alpha: f64,
    /// Keeps the occupancy integrand finite at probability 1.
    pub iota: f64,
    /// Prediction horizon in layers.
    pub m_max: usize,
    /// Agents farther than this are not sensed, meters.
    pub sense_radius: f64,
    pub kernel: DiffusionKernel,
    pub max_expansions: usize,
}

impl Default for ReplanParams {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            iota: 0.001,
            m_max: 12,
            sense_radius: 3.0,
            kernel: DiffusionKernel::default(),
            max_expansions: 60_000,
        }
    }
}
