//! Randomized route-class selection for robots that share a map but not
//! their plans.
//!
//! A robot lists a few cheap paths that wind around obstacles differently,
//! picks one at random with weights from a travel-time model that counts
//! the other robots and pedestrians, then follows it with a replanner that
//! stays in that class and a local avoidance controller.
//!
//! Module map:
//!
//! - [`gridmap`]: occupancy grid ingestion, obstacle labeling, homology rays
//!   and synthetic traffic-density estimation.
//! - [`topo`]: H₂-signatures, the rationalized spatio-temporal lattice and the
//!   multi-class A* search.
//! - [`assign`]: the travel-time cost model and the complete, 2-robot and
//!   ensemble probability-assignment solvers.
//! - [`replan`]: short-horizon occupancy prediction and the reference-guided
//!   replanner.
//! - [`control`]: lookahead tracking, collision-cone repulsion, obstacle
//!   velocity cancellation and differential-drive wheel mapping.
//! - [`sim`]: deterministic multi-agent simulation and run metrics.
//! - [`config`]: the flat `key = value` configuration format.

pub mod assign;
pub mod config;
pub mod control;
pub mod gridmap;
pub mod replan;
pub mod sim;
pub mod topo;

/// Planar point in meters.
pub type Point = nalgebra::Point2<f64>;
/// Planar vector (velocities, offsets) in meters or meters/second.
pub type Vec2 = nalgebra::Vector2<f64>;

pub use assign::{AssignModel, AssignParams, ClassCosts, CostType, ProbabilityVector};
pub use gridmap::{GridMap, Ray, TrafficDensity};
pub use topo::{DiscretizationParams, H2Signature, SpacetimePath, SpacetimeVertex};
