//! Matched-seed policy comparisons over a robot × pedestrian grid.

use std::fmt::Write as _;

use rayon::prelude::*;
use topoflow::sim::{run_scenario_with, Environment, Policy, RunMetrics, ScenarioConfig, SimError, TRAJECTORY_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Compared policy first, baseline second.
    pub policies: [Policy; 2],
    pub robot_counts: Vec<usize>,
    pub pedestrian_counts: Vec<usize>,
    pub seeds: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.seeds == 0 {
            return Err("at least one seed is required".into());
        }
        if self.robot_counts.is_empty() || self.pedestrian_counts.is_empty() {
            return Err("robot and pedestrian sweeps must be nonempty".into());
        }
        Ok(())
    }
}

/// Seed-averaged comparison of the two policies in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonCell {
    /// 100 × mean avg_travel (compared) / mean avg_travel (baseline).
    pub avg_ratio: f64,
    /// 100 × mean max_travel (compared) / mean max_travel (baseline).
    pub max_ratio: f64,
    /// Mean per-robot avoidance time, compared minus baseline, seconds.
    pub collision_diff: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub policy: Policy,
    pub seed: u64,
    pub metrics: RunMetrics,
    /// Trajectory rows of the initial world.
    pub initial: String,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub robots: usize,
    pub pedestrians: usize,
    pub outcome: Result<(ComparisonCell, Vec<RunRecord>), String>,
}

/// Splits `robots` over the base config's groups, earlier groups taking the
/// remainder.
pub fn with_counts(base: &ScenarioConfig, robots: usize, pedestrians: usize) -> ScenarioConfig {
    let mut cfg = base.clone();
    let k = cfg.groups.len().max(1);
    for (i, g) in cfg.groups.iter_mut().enumerate() {
        g.count = robots / k + usize::from(i < robots % k);
    }
    cfg.pedestrians = pedestrians;
    cfg
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn compare(a: &[RunMetrics], b: &[RunMetrics]) -> ComparisonCell {
    let avg = |r: &[RunMetrics]| mean(r.iter().map(|m| m.avg_travel));
    let max = |r: &[RunMetrics]| mean(r.iter().map(|m| m.max_travel));
    let avoid = |r: &[RunMetrics]| mean(r.iter().map(|m| m.avg_avoidance));
    ComparisonCell {
        avg_ratio: 100.0 * avg(a) / avg(b),
        max_ratio: 100.0 * max(a) / max(b),
        collision_diff: avoid(a) - avoid(b),
    }
}

pub fn run_cell(
    base: &ScenarioConfig,
    env: &Environment,
    spec: &ExperimentSpec,
    robots: usize,
    pedestrians: usize,
) -> Result<(ComparisonCell, Vec<RunRecord>), SimError> {
    let cfg = with_counts(base, robots, pedestrians);
    let mut records = Vec::new();
    let mut by_policy: [Vec<RunMetrics>; 2] = Default::default();
    for seed in 0..spec.seeds as u64 {
        for (slot, &policy) in spec.policies.iter().enumerate() {
            let run_cfg = ScenarioConfig { policy, seed: base.seed + seed, ..cfg.clone() };
            let mut initial = None;
            let metrics = run_scenario_with(&run_cfg, env, |w| {
                if initial.is_none() {
                    initial = Some(w.trajectory_rows());
                }
            })?;
            by_policy[slot].push(metrics.clone());
            records.push(RunRecord { policy, seed: run_cfg.seed, metrics, initial: initial.unwrap_or_default() });
        }
    }
    Ok((compare(&by_policy[0], &by_policy[1]), records))
}

/// Runs every cell; a failing cell is recorded and the sweep goes on.
pub fn run_experiment(base: &ScenarioConfig, env: &Environment, spec: &ExperimentSpec) -> Vec<CellResult> {
    let cells: Vec<(usize, usize)> = spec
        .robot_counts
        .iter()
        .flat_map(|&r| spec.pedestrian_counts.iter().map(move |&p| (r, p)))
        .collect();
    cells
        .par_iter()
        .map(|&(robots, pedestrians)| CellResult {
            robots,
            pedestrians,
            outcome: run_cell(base, env, spec, robots, pedestrians).map_err(|e| e.to_string()),
        })
        .collect()
}

pub const COMPARISON_HEADER: &str = "robots,pedestrians,avg_ratio,max_ratio,collision_diff,status";

pub fn comparison_csv(cells: &[CellResult]) -> String {
    let mut s = format!("{COMPARISON_HEADER}\n");
    for c in cells {
        match &c.outcome {
            Ok((cmp, _)) => writeln!(
                s,
                "{},{},{:?},{:?},{:?},ok",
                c.robots, c.pedestrians, cmp.avg_ratio, cmp.max_ratio, cmp.collision_diff
            ),
            // Commas would break the row.
            Err(e) => writeln!(s, "{},{},,,,failed: {}", c.robots, c.pedestrians, e.replace(',', ";")),
        }
        .unwrap();
    }
    s
}

pub fn runs_csv(cells: &[CellResult]) -> String {
    let mut s = format!("{}\n", RunMetrics::CSV_HEADER);
    for c in cells {
        if let Ok((_, records)) = &c.outcome {
            for r in records {
                writeln!(s, "{}", r.metrics.csv_row(c.pedestrians, r.policy.name(), r.seed)).unwrap();
            }
        }
    }
    s
}

/// Initial agent states of every run, for checking that matched runs start
/// identically.
pub fn initial_states_csv(cells: &[CellResult]) -> String {
    let mut s = format!("robots,pedestrians,policy,seed,{TRAJECTORY_HEADER}\n");
    for c in cells {
        if let Ok((_, records)) = &c.outcome {
            for r in records {
                for row in r.initial.lines() {
                    writeln!(s, "{},{},{},{},{row}", c.robots, c.pedestrians, r.policy, r.seed).unwrap();
                }
            }
        }
    }
    s
}
