//! Discrete-time multi-agent simulation of robots and pedestrians.

mod metrics;
mod scenario;
mod world;

use thiserror::Error;

use crate::assign::AssignError;
use crate::config::ConfigError;
use crate::gridmap::MapError;
use crate::topo::TopoError;

pub use metrics::RunMetrics;
pub use scenario::{DensityMode, Policy, Region, RobotGroup, ScenarioConfig};
pub use world::{
    collect_metrics, init_scenario, run_scenario, run_scenario_with, step, Agent, AgentKind, Behavior, Environment,
    PedestrianState, RobotState, WorldState, TRAJECTORY_HEADER,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not place {what} without overlap after {attempts} attempts")]
    PlacementFailed { what: &'static str, attempts: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("planning failed for robot {robot}: {source}")]
    Plan { robot: usize, source: TopoError },
    #[error(transparent)]
    Assign(#[from] AssignError),
}
