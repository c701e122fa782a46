use std::collections::BTreeSet;

use super::{AssignError, AssignModel, AssignParams, CostType};
use crate::gridmap::TrafficDensity;
use crate::topo::{edge_cost, SpacetimePath};
use crate::Point;

/// Per-class cost terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCosts {
    /// Travel time of each class path, seconds.
    pub base: Vec<f64>,
    /// Density summed over the cells each class path covers.
    pub traffic: Vec<f64>,
    /// `overlap[j][k]`: travel plus traffic cost of the part of path `k`
    /// lying inside the corridor around path `j`.
    pub overlap: Vec<Vec<f64>>,
}

impl ClassCosts {
    pub fn m(&self) -> usize {
        self.base.len()
    }
}

/// Class index of each imagined robot, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointChoice(pub Vec<usize>);

impl JointChoice {
    pub fn counts(&self, m: usize) -> Result<Vec<usize>, AssignError> {
        let mut counts = vec![0; m];
        for &j in &self.0 {
            if j >= m {
                return Err(AssignError::ClassOutOfRange { index: j, m });
            }
            counts[j] += 1;
        }
        Ok(counts)
    }
}

/// Distinct density-grid cells touched by the segment `a → b`.
fn segment_cells(a: &Point, b: &Point, density: &TrafficDensity, out: &mut BTreeSet<usize>) {
    let res = density.resolution;
    let n = ((b - a).norm() / (0.25 * res)).ceil().max(1.0) as usize;
    for k in 0..=n {
        let p = a + (b - a) * (k as f64 / n as f64);
        if p.x < 0.0 || p.y < 0.0 {
            continue;
        }
        let (x, y) = ((p.x / res) as usize, (p.y / res) as usize);
        if x < density.width && y < density.height {
            out.insert(y * density.width + x);
        }
    }
}

/// Distinct cells covered by a path.
pub fn rasterize_path(path: &SpacetimePath, density: &TrafficDensity) -> BTreeSet<usize> {
    let pts = path.positions();
    let mut cells = BTreeSet::new();
    if pts.len() == 1 {
        segment_cells(&pts[0], &pts[0], density, &mut cells);
    }
    for w in pts.windows(2) {
        segment_cells(&w[0], &w[1], density, &mut cells);
    }
    cells
}

fn rho_sum(cells: &BTreeSet<usize>, density: &TrafficDensity) -> f64 {
    cells.iter().map(|&i| density.rho[i]).sum()
}

pub fn compute_class_costs(paths: &[SpacetimePath], density: &TrafficDensity, params: &AssignParams) -> ClassCosts {
    let m = paths.len();
    let aq = params.a * params.q;
    let positions: Vec<Vec<Point>> = paths.iter().map(|p| p.positions()).collect();
    let base: Vec<f64> = paths.iter().map(|p| p.base_cost).collect();
    let traffic: Vec<f64> = paths.iter().map(|p| rho_sum(&rasterize_path(p, density), density)).collect();
    let cw2 = params.corridor_width * params.corridor_width;

    let mut overlap = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in 0..m {
            let inside: Vec<bool> = positions[k]
                .iter()
                .map(|v| positions[j].iter().any(|u| (u - v).norm_squared() <= cw2))
                .collect();
            let path = &paths[k];
            let mut travel = 0.0;
            let mut cells = BTreeSet::new();
            if path.len() == 1 && inside[0] {
                segment_cells(&positions[k][0], &positions[k][0], density, &mut cells);
            }
            for e in 0..path.len().saturating_sub(1) {
                if inside[e] && inside[e + 1] {
                    travel += edge_cost(&path.vertices[e], &path.vertices[e + 1], &path.disc);
                    segment_cells(&positions[k][e], &positions[k][e + 1], density, &mut cells);
                }
            }
            overlap[j][k] = travel + aq * rho_sum(&cells, density);
        }
    }
    ClassCosts { base, traffic, overlap }
}

/// Count multiplier applied inside `D_j`: the two-robot model stands in for
/// `n` robots with two, so each imagined robot counts `n / 2` times.
pub(crate) fn count_scale(params: &AssignParams) -> f64 {
    match params.model {
        AssignModel::TwoRobot => params.n as f64 / 2.0,
        _ => 1.0,
    }
}

/// `D_j` for robot counts `counts`, each multiplied by `scale`.
pub(crate) fn d_from_counts(j: usize, counts: &[usize], scale: f64, costs: &ClassCosts, params: &AssignParams) -> f64 {
    let penalty: f64 = counts
        .iter()
        .zip(&costs.overlap[j])
        .map(|(&c, &o)| scale * c as f64 * o)
        .sum();
    costs.base[j] + params.a * params.q * costs.traffic[j] + params.b * penalty
}

/// Group cost for a count vector.
pub(crate) fn cost_from_counts(counts: &[usize], scale: f64, costs: &ClassCosts, params: &AssignParams) -> f64 {
    let total: usize = counts.iter().sum();
    let d = (0..counts.len()).filter(|&j| counts[j] > 0).map(|j| (j, d_from_counts(j, counts, scale, costs, params)));
    match params.cost_type {
        CostType::Average => d.map(|(j, dj)| counts[j] as f64 * dj).sum::<f64>() / total as f64,
        CostType::Maximum => d.map(|(_, dj)| dj).fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Travel-time estimate `D_j` of a robot on class `j` under joint choice
/// `sigma`.
pub fn d_cost(sigma: &JointChoice, j: usize, costs: &ClassCosts, params: &AssignParams) -> Result<f64, AssignError> {
    let counts = sigma.counts(costs.m())?;
    if j >= costs.m() {
        return Err(AssignError::ClassOutOfRange { index: j, m: costs.m() });
    }
    Ok(d_from_counts(j, &counts, count_scale(params), costs, params))
}

/// Average or maximum of `D_j` over the robots in `sigma`.
pub fn group_cost(sigma: &JointChoice, costs: &ClassCosts, params: &AssignParams) -> Result<f64, AssignError> {
    if sigma.0.is_empty() {
        return Err(AssignError::EmptyChoice);
    }
    let counts = sigma.counts(costs.m())?;
    Ok(cost_from_counts(&counts, count_scale(params), costs, params))
}
