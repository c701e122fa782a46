use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use topoflow::assign::{compute_class_costs, solve};
use topoflow::gridmap::estimate_traffic_density;
use topoflow::sim::{
    run_scenario_with, Environment, Policy, Region, RobotGroup, RunMetrics, ScenarioConfig, TRAJECTORY_HEADER,
};
use topoflow::topo::find_topological_paths_with;
use topoflow::Point;

use crate::calibrate::{calibrate, CalibrationSpec};
use crate::experiment::{comparison_csv, initial_states_csv, run_experiment, runs_csv, ExperimentSpec};
use crate::{apply_overrides, load_map, load_scenario, write_file, CliError};

#[derive(Debug, Parser)]
#[command(name = "topoflow", version, about = "Topological path assignment experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the classes found between two points and their probabilities.
    Plan(PlanArgs),
    /// Run one scenario and print its metrics row.
    Run(RunArgs),
    /// Compare two policies over a robot × pedestrian grid.
    Sweep(SweepArgs),
    /// Fit the congestion constants a and b on a single-passage map.
    Calibrate(CalibrateArgs),
    /// Estimate a traffic density map and write it as ASCII PGM.
    Density(DensityArgs),
}

/// Scenario source shared by the subcommands that simulate or plan.
#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Flat `key = value` scenario file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Map file; overrides the config's `map` key.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Config override, repeatable, e.g. `--set assign.model=ensemble`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub policy: Option<Policy>,
    #[arg(long)]
    pub pedestrians: Option<usize>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, topoflow::config::KvConfig, topoflow::GridMap), CliError> {
        let mut sets = self.sets.clone();
        if let Some(s) = self.seed {
            sets.push(format!("seed={s}"));
        }
        if let Some(p) = self.policy {
            sets.push(format!("policy={p}"));
        }
        if let Some(q) = self.pedestrians {
            sets.push(format!("pedestrians={q}"));
        }
        load_scenario(self.config.as_deref(), self.map.as_deref(), &sets)
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Start point `x,y` in meters.
    #[arg(long, value_parser = parse_point)]
    pub start: Point,
    /// Goal point `x,y` in meters.
    #[arg(long, value_parser = parse_point)]
    pub goal: Point,
    /// Contending robots; defaults to the config's estimate or 1.
    #[arg(long)]
    pub contending: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Write the metrics CSV here instead of stdout.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Write the per-step trajectory CSV here.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Compared policy, then baseline.
    #[arg(long, value_delimiter = ',', default_values_t = [Policy::Topological, Policy::Shortest])]
    pub policies: Vec<Policy>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub robot_counts: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub pedestrian_counts: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Directory for comparison.csv, runs.csv and initial_states.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_values_t = CalibrationSpec::default().robot_counts)]
    pub robot_counts: Vec<usize>,
    #[arg(long, default_value_t = CalibrationSpec::default().fixed_pedestrians)]
    pub fixed_pedestrians: usize,
    #[arg(long, value_delimiter = ',', default_values_t = CalibrationSpec::default().pedestrian_counts)]
    pub pedestrian_counts: Vec<usize>,
    #[arg(long, default_value_t = CalibrationSpec::default().fixed_robots)]
    pub fixed_robots: usize,
    #[arg(long, default_value_t = CalibrationSpec::default().seeds)]
    pub seeds: usize,
    /// Write the input config with the fitted `assign.a` and `assign.b` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, default_value_t = ScenarioConfig::default().density_paths)]
    pub paths: usize,
    #[arg(long, default_value_t = ScenarioConfig::default().footprint_radius)]
    pub footprint: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the PGM here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<Point, String> {
    let bad = || format!("expected `x,y`, got `{s}`");
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok(Point::new(x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source }),
    }
}

fn plan(args: &PlanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, _, map) = args.scenario.load()?;
    let env = Environment::new(map, &cfg)?;
    let (start, goal) = (args.start, args.goal);
    let found = find_topological_paths_with(&env.planning, &start, &goal, cfg.assign.m, &cfg.disc, &cfg.search)
        .map_err(|source| topoflow::sim::SimError::Plan { robot: 0, source })?;
    let n = args.contending.or(cfg.contending).unwrap_or(1);
    let params = cfg.assign_for(n);
    let costs = compute_class_costs(&found.paths, env.density(cfg.density_mode), &params);
    let p = match cfg.policy {
        Policy::Shortest => topoflow::ProbabilityVector::delta(found.paths.len(), 0),
        Policy::UniformProbability => topoflow::ProbabilityVector::uniform(found.paths.len()),
        Policy::Topological => solve(&costs, &params).map_err(topoflow::sim::SimError::from)?,
    };
    let mut text = String::from("class,base_cost,traffic,signature,probability\n");
    for (j, path) in found.paths.iter().enumerate() {
        text.push_str(&format!("{},{:?},{:?},{},{:?}\n", j + 1, path.base_cost, costs.traffic[j], path.signature, p[j]));
    }
    emit(out, None, &text)
}

fn run_one(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (cfg, _, map) = args.scenario.load()?;
    let env = Environment::new(map, &cfg)?;
    let mut log = args.trajectory.as_ref().map(|_| format!("{TRAJECTORY_HEADER}\n"));
    let metrics = run_scenario_with(&cfg, &env, |w| {
        if let Some(l) = log.as_mut() {
            l.push_str(&w.trajectory_rows());
        }
    })?;
    if let (Some(path), Some(l)) = (&args.trajectory, &log) {
        write_file(path, l)?;
    }
    let text = format!("{}\n{}\n", RunMetrics::CSV_HEADER, metrics.csv_row(cfg.pedestrians, cfg.policy.name(), cfg.seed));
    emit(out, args.metrics.as_deref(), &text)
}

fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let [compared, baseline] = args.policies[..] else {
        return Err(CliError::Usage("--policies takes exactly two names".into()));
    };
    let spec = ExperimentSpec {
        policies: [compared, baseline],
        robot_counts: args.robot_counts.clone(),
        pedestrian_counts: args.pedestrian_counts.clone(),
        seeds: args.seeds,
    };
    spec.validate().map_err(CliError::Usage)?;
    let (cfg, _, map) = args.scenario.load()?;
    if cfg.groups.is_empty() {
        return Err(CliError::Usage("a sweep needs at least one robot group in the config".into()));
    }
    let env = Environment::new(map, &cfg)?;
    let cells = run_experiment(&cfg, &env, &spec);
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Write { path: args.out.clone(), source })?;
    let comparison = comparison_csv(&cells);
    write_file(&args.out.join("comparison.csv"), &comparison)?;
    write_file(&args.out.join("runs.csv"), &runs_csv(&cells))?;
    write_file(&args.out.join("initial_states.csv"), &initial_states_csv(&cells))?;
    emit(out, None, &comparison)?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        return Err(CliError::PartialSweep { failed, total: cells.len() });
    }
    Ok(())
}

fn calibrate_cmd(args: &CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (mut cfg, mut kv, map) = args.scenario.load()?;
    if cfg.groups.is_empty() {
        // Left fifth to right fifth of the map, full height less a margin.
        let (w, h) = map.extent();
        cfg.groups.push(RobotGroup {
            start: Region::new(0.5, 0.5, 0.2 * w, h - 0.5),
            goal: Region::new(0.8 * w, 0.5, w - 0.5, h - 0.5),
            count: 1,
        });
    }
    let spec = CalibrationSpec {
        robot_counts: args.robot_counts.clone(),
        fixed_pedestrians: args.fixed_pedestrians,
        pedestrian_counts: args.pedestrian_counts.clone(),
        fixed_robots: args.fixed_robots,
        seeds: args.seeds.max(1),
    };
    let env = Environment::new(map, &cfg)?;
    let fit = calibrate(&cfg, &env, &spec)?;
    let mut text = String::from("sweep,count,mean_max_travel\n");
    for (n, t) in &fit.robot_points {
        text.push_str(&format!("robots,{n},{t:?}\n"));
    }
    for (q, t) in &fit.pedestrian_points {
        text.push_str(&format!("pedestrians,{q},{t:?}\n"));
    }
    text.push_str(&format!(
        "# slopes {:?} s/robot, {:?} s/pedestrian; base cost {:?} s, traffic cost {:?}\n",
        fit.slope_robots, fit.slope_pedestrians, fit.base_cost, fit.traffic_cost
    ));
    text.push_str(&format!("assign.a = {:?}\nassign.b = {:?}\n", fit.a, fit.b));
    emit(out, None, &text)?;
    if let Some(path) = &args.out {
        apply_overrides(&mut kv, &[format!("assign.a={:?}", fit.a), format!("assign.b={:?}", fit.b)])?;
        write_file(path, &kv.to_string())?;
    }
    Ok(())
}

fn density(args: &DensityArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let map = load_map(&args.map)?;
    let d = estimate_traffic_density(&map, args.paths, args.footprint, args.seed)
        .map_err(|source| CliError::Map { path: args.map.clone(), source })?;
    emit(out, args.out.as_deref(), &d.to_pgm())
}

/// Executes a parsed command, writing primary output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Plan(a) => plan(a, out),
        Command::Run(a) => run_one(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Calibrate(a) => calibrate_cmd(a, out),
        Command::Density(a) => density(a, out),
    }
}
