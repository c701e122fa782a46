//! Path-class probability assignment.
//!
//! A robot imagines `n` contending robots with the same start and goal, each
//! independently choosing class `j` with probability `p_j`, and picks `p` to
//! minimize the expected congestion cost. Three models are provided: the
//! complete enumeration over joint choices, a quadratic two-robot surrogate
//! with scaled counts, and the large-`n` min-max ensemble model.

mod complete;
mod costs;
mod ensemble;
pub mod lp;
mod simplex;
mod two_robot;

use rand::Rng;
use thiserror::Error;

pub use complete::{expected_cost, expected_cost_raw, solve_complete, COMPOSITION_LIMIT};
pub use costs::{compute_class_costs, d_cost, group_cost, rasterize_path, ClassCosts, JointChoice};
pub use ensemble::{solve_ensemble, EnsembleSolution};
pub use simplex::project_to_simplex;
pub use two_robot::{solve_two_robot, solve_two_robot_with, two_robot_matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("{compositions} count vectors exceed the enumeration limit")]
    TooLarge { compositions: f64 },
    #[error("joint choice is empty")]
    EmptyChoice,
    #[error("class index {index} out of range for {m} classes")]
    ClassOutOfRange { index: usize, m: usize },
    #[error("not a probability vector: {0}")]
    InvalidProbability(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] lp::LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostType {
    Average,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignModel {
    Complete,
    TwoRobot,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignParams {
    /// Traffic coefficient per distant agent.
    pub a: f64,
    /// Overlap coefficient, seconds per robot per overlap-second.
    pub b: f64,
    /// Estimated number of distant agents.
    pub q: f64,
    /// Estimated number of contending robots.
    pub n: usize,
    /// Number of classes to plan.
    pub m: usize,
    /// Corridor half-width for the overlap test, meters.
    pub corridor_width: f64,
    pub cost_type: CostType,
    pub model: AssignModel,
}

impl Default for AssignParams {
    fn default() -> Self {
        Self {
            a: 0.1625,
            b: 0.04548,
            q: 0.0,
            n: 5,
            m: 3,
            corridor_width: 0.5,
            cost_type: CostType::Average,
            model: AssignModel::TwoRobot,
        }
    }
}

impl AssignParams {
    pub fn validate(&self) -> Result<(), AssignError> {
        let ok = self.a >= 0.0
            && self.b >= 0.0
            && self.q >= 0.0
            && self.m >= 1
            && self.corridor_width > 0.0
            && self.a.is_finite()
            && self.b.is_finite()
            && self.q.is_finite();
        if ok {
            Ok(())
        } else {
            Err(AssignError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self, AssignError> {
        if p.is_empty() {
            return Err(AssignError::InvalidProbability("empty".into()));
        }
        if p.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            return Err(AssignError::InvalidProbability(format!("{p:?}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(AssignError::InvalidProbability(format!("sums to {s}")));
        }
        Ok(Self(p.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    /// All mass on class `j`.
    pub fn delta(m: usize, j: usize) -> Self {
        let mut p = vec![0.0; m];
        p[j] = 1.0;
        Self(p)
    }

    /// Projects an arbitrary vector onto the simplex.
    pub(crate) fn from_projection(v: &[f64]) -> Self {
        Self(project_to_simplex(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest minus smallest component.
    pub fn spread(&self) -> f64 {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.0.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Solves with the model named in `params`.
pub fn solve(costs: &ClassCosts, params: &AssignParams) -> Result<ProbabilityVector, AssignError> {
    params.validate()?;
    match params.model {
        AssignModel::Complete => solve_complete(costs, params),
        AssignModel::TwoRobot => solve_two_robot(costs, params),
        AssignModel::Ensemble => Ok(solve_ensemble(costs, params)?.p),
    }
}

/// Draws a 0-based class index with probability `p[j]`.
pub fn sample_class<R: Rng + ?Sized>(p: &ProbabilityVector, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &pj) in p.as_slice().iter().enumerate() {
        if pj <= 0.0 {
            continue;
        }
        acc += pj;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}
