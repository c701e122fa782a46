//! Fits the congestion constants `a` and `b` from max-travel-time sweeps on
//! a single-passage map.
//!
//! For robots sharing one path the per-robot cost model reads
//! `D = C_B + a·Q·C_T + b·n·(C_B + a·Q·C_T)`, so
//!
//! - `∂D/∂n = b·(C_B + a·Q₀·C_T)` at the robot sweep's pedestrian count `Q₀`;
//! - `∂D/∂Q = a·C_T·(1 + b·n₀)` at the pedestrian sweep's robot count `n₀`.
//!
//! Both slopes come from least squares; the two relations are solved jointly.

use thiserror::Error;
use topoflow::assign::{compute_class_costs, AssignParams};
use topoflow::sim::{run_scenario, Environment, Policy, ScenarioConfig, SimError};
use topoflow::topo::find_topological_paths_with;

use crate::experiment::with_counts;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("need at least 3 sweep points, got {0}")]
    InsufficientPoints(usize),
    #[error("sweep points must not all share one x value")]
    Degenerate,
    #[error("the config needs a robot group for the passage start and goal")]
    NoGroup,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), CalibrateError> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 3 {
        return Err(CalibrateError::InsufficientPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CalibrateError::Degenerate);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Solves the two slope relations for `(a, b)` by fixed-point iteration.
/// Negative estimates are clamped to zero.
pub fn constants_from_slopes(
    slope_robots: f64,
    slope_pedestrians: f64,
    base_cost: f64,
    traffic_cost: f64,
    fixed_robots: usize,
    fixed_pedestrians: usize,
) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for _ in 0..200 {
        let nb = (slope_robots / (base_cost + a * fixed_pedestrians as f64 * traffic_cost)).max(0.0);
        let na = if traffic_cost > 0.0 {
            (slope_pedestrians / (traffic_cost * (1.0 + nb * fixed_robots as f64))).max(0.0)
        } else {
            0.0
        };
        let done = (na - a).abs() <= 1e-15 * na.abs().max(1.0) && (nb - b).abs() <= 1e-15 * nb.abs().max(1.0);
        (a, b) = (na, nb);
        if done {
            break;
        }
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSpec {
    pub robot_counts: Vec<usize>,
    /// Pedestrians during the robot sweep.
    pub fixed_pedestrians: usize,
    pub pedestrian_counts: Vec<usize>,
    /// Robots during the pedestrian sweep.
    pub fixed_robots: usize,
    pub seeds: usize,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            robot_counts: vec![2, 4, 6, 8, 10],
            fixed_pedestrians: 0,
            pedestrian_counts: vec![0, 5, 10, 15, 20],
            fixed_robots: 10,
            seeds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
    pub slope_robots: f64,
    pub slope_pedestrians: f64,
    /// Base cost of the passage path, seconds.
    pub base_cost: f64,
    /// Traffic-weighted cost of the passage path.
    pub traffic_cost: f64,
    /// (robots, mean max travel) points.
    pub robot_points: Vec<(usize, f64)>,
    /// (pedestrians, mean max travel) points.
    pub pedestrian_points: Vec<(usize, f64)>,
}

fn mean_max_travel(cfg: &ScenarioConfig, env: &Environment, seeds: usize) -> Result<f64, SimError> {
    let mut total = 0.0;
    for s in 0..seeds as u64 {
        total += run_scenario(&ScenarioConfig { seed: cfg.seed + s, ..cfg.clone() }, env)?.max_travel;
    }
    Ok(total / seeds as f64)
}

/// Runs both sweeps with the shortest policy and fits `(a, b)`. The base
/// config's first group defines the passage start and goal regions.
pub fn calibrate(base: &ScenarioConfig, env: &Environment, spec: &CalibrationSpec) -> Result<Calibration, CalibrateError> {
    for counts in [&spec.robot_counts, &spec.pedestrian_counts] {
        if counts.len() < 3 {
            return Err(CalibrateError::InsufficientPoints(counts.len()));
        }
    }
    let group = base.groups.first().ok_or(CalibrateError::NoGroup)?;
    let found = find_topological_paths_with(
        &env.planning,
        &group.start.center(),
        &group.goal.center(),
        1,
        &base.disc,
        &base.search,
    )
    .map_err(|source| SimError::Plan { robot: 0, source })?;
    let path = found.paths.first().ok_or(SimError::Plan { robot: 0, source: topoflow::topo::TopoError::Unreachable })?;
    let costs = compute_class_costs(std::slice::from_ref(path), env.density(base.density_mode), &AssignParams::default());
    let (base_cost, traffic_cost) = (costs.base[0], costs.traffic[0]);

    let base = ScenarioConfig { policy: Policy::Shortest, ..base.clone() };
    let mut robot_points = Vec::new();
    for &n in &spec.robot_counts {
        robot_points.push((n, mean_max_travel(&with_counts(&base, n, spec.fixed_pedestrians), env, spec.seeds)?));
    }
    let mut pedestrian_points = Vec::new();
    for &q in &spec.pedestrian_counts {
        pedestrian_points.push((q, mean_max_travel(&with_counts(&base, spec.fixed_robots, q), env, spec.seeds)?));
    }
    let xy = |pts: &[(usize, f64)]| -> (Vec<f64>, Vec<f64>) { pts.iter().map(|&(x, y)| (x as f64, y)).unzip() };
    let (rx, ry) = xy(&robot_points);
    let (px, py) = xy(&pedestrian_points);
    let (slope_robots, _) = fit_line(&rx, &ry)?;
    let (slope_pedestrians, _) = fit_line(&px, &py)?;
    let (a, b) = constants_from_slopes(
        slope_robots,
        slope_pedestrians,
        base_cost,
        traffic_cost,
        spec.fixed_robots,
        spec.fixed_pedestrians,
    );
    Ok(Calibration {
        a,
        b,
        slope_robots,
        slope_pedestrians,
        base_cost,
        traffic_cost,
        robot_points,
        pedestrian_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 * 1.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.37 * x - 2.0).collect();
        let (s, c) = fit_line(&xs, &ys).unwrap();
        assert!((s - 0.37).abs() < 1e-6 && (c + 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_data_gives_zero_constants() {
        let (s, _) = fit_line(&[2.0, 4.0, 6.0], &[9.0, 9.0, 9.0]).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(constants_from_slopes(0.0, 0.0, 12.0, 3.0, 10, 0), (0.0, 0.0));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_line(&[1.0, 2.0], &[1.0, 2.0]), Err(CalibrateError::InsufficientPoints(2))));
        assert!(matches!(fit_line(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(CalibrateError::Degenerate)));
    }

    #[test]
    fn slopes_round_trip_through_the_model() {
        let (a, b, cb, ct, n0, q0) = (0.16, 0.045, 12.0, 7.5, 10usize, 4usize);
        let slope_n = b * (cb + a * q0 as f64 * ct);
        let slope_q = a * ct * (1.0 + b * n0 as f64);
        let (fa, fb) = constants_from_slopes(slope_n, slope_q, cb, ct, n0, q0);
        assert!((fa - a).abs() < 1e-12 && (fb - b).abs() < 1e-12, "{fa} {fb}");
    }
}
