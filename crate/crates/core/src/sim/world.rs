use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::{mean, RunMetrics};
use super::scenario::{DensityMode, Policy, ScenarioConfig};
use super::SimError;
use crate::assign::{compute_class_costs, sample_class, solve, ProbabilityVector};
use crate::control::{
    cone_repulsion, integrate_unicycle, obstacle_cancel, saturate, to_wheel_speeds, tracking_velocity,
    ControlOutput, RobotPose, WheelCommand,
};
use crate::gridmap::{estimate_traffic_density, Cell, Dijkstra, GridMap, TrafficDensity};
use crate::replan::{merge_fields, predict_agent, replan, Observation, OccupancyField};
use crate::topo::{
    find_topological_paths_with, segment_signature, snap_to_lattice, H2Signature, SpacetimePath,
};
use crate::{Point, Vec2};

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Maps and densities shared by every run on one map.
#[derive(Debug, Clone)]
pub struct Environment {
    /// Occupancy as given; used for wall checks and obstacle sensing.
    pub raw: GridMap,
    /// Occupancy dilated by the safety radius; used for planning.
    pub planning: GridMap,
    pub estimated: TrafficDensity,
    pub uniform: TrafficDensity,
}

impl Environment {
    pub fn new(map: GridMap, cfg: &ScenarioConfig) -> Result<Self, SimError> {
        let estimated = estimate_traffic_density(&map, cfg.density_paths, cfg.footprint_radius, cfg.density_seed)?;
        Ok(Self::with_density(map, cfg, estimated))
    }

    /// Skips density estimation; `density` must match the map's grid.
    pub fn with_density(map: GridMap, cfg: &ScenarioConfig, density: TrafficDensity) -> Self {
        Self {
            planning: map.with_clearance(cfg.safety_radius),
            uniform: TrafficDensity::uniform(&map),
            raw: map,
            estimated: density,
        }
    }

    pub fn density(&self, mode: DensityMode) -> &TrafficDensity {
        match mode {
            DensityMode::Estimated => &self.estimated,
            DensityMode::Uniform => &self.uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Robot,
    Pedestrian,
}

impl AgentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::Robot => "robot",
            AgentKind::Pedestrian => "pedestrian",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobotState {
    pub group: usize,
    pub probabilities: ProbabilityVector,
    /// Signatures of the classes that were found, cheapest first.
    pub class_signatures: Vec<H2Signature>,
    pub class: usize,
    pub reference: SpacetimePath,
    /// Path currently tracked; starts at layer 0 at `plan_t0`.
    pub plan: SpacetimePath,
    pub plan_t0: f64,
    /// Signature of the lookahead point's trace from the reference start.
    pub prefix: H2Signature,
    pub last_replan: f64,
    /// Agents sensed at the previous step, by index.
    pub sensed: Vec<usize>,
    pub replans: usize,
    pub replan_failures: usize,
}

#[derive(Debug, Clone)]
pub struct PedestrianState {
    pub route: Vec<Point>,
    /// Cumulative arc length at each route point.
    cum: Vec<f64>,
    /// Arc length reached so far.
    pub progress: f64,
    /// Progress and clock at the last advance of at least [`STALL_STEP`].
    mark: (f64, f64),
}

/// Progress (m) that counts as moving for the patience rule.
const STALL_STEP: f64 = 0.1;

impl PedestrianState {
    fn new(route: Vec<Point>) -> Self {
        let mut cum = vec![0.0];
        for w in route.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        Self { route, cum, progress: 0.0, mark: (0.0, 0.0) }
    }

    fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.length());
        let i = self.cum.partition_point(|&c| c <= s).clamp(1, self.route.len().max(2) - 1);
        if self.route.len() == 1 {
            return self.route[0];
        }
        let (a, b) = (self.route[i - 1], self.route[i]);
        let seg = self.cum[i] - self.cum[i - 1];
        if seg <= 0.0 {
            return b;
        }
        a + (b - a) * ((s - self.cum[i - 1]) / seg)
    }

    /// Advances `progress` to the projection of `p` on nearby segments.
    fn advance(&mut self, p: &Point, window: f64) {
        let mut best = (f64::INFINITY, self.progress);
        for i in 1..self.route.len() {
            if self.cum[i] < self.progress {
                continue;
            }
            if self.cum[i - 1] > self.progress + window {
                break;
            }
            let (a, b) = (self.route[i - 1], self.route[i]);
            let ab = b - a;
            let t = if ab.norm_squared() > 0.0 { ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
            let d = (a + ab * t - p).norm();
            if d < best.0 {
                best = (d, self.cum[i - 1] + t * ab.norm());
            }
        }
        self.progress = self.progress.max(best.1);
    }
}

#[derive(Debug, Clone)]
pub enum Behavior {
    Robot(Box<RobotState>),
    Pedestrian(PedestrianState),
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub kind: AgentKind,
    pub pose: RobotPose,
    /// Planar velocity of the center.
    pub velocity: Vec2,
    pub goal: Point,
    pub done: bool,
    pub finish_time: Option<f64>,
    pub avoidance_time: f64,
    pub behavior: Behavior,
}

impl Agent {
    pub fn robot(&self) -> Option<&RobotState> {
        match &self.behavior {
            Behavior::Robot(r) => Some(r),
            Behavior::Pedestrian(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub clock: f64,
    pub steps: usize,
    pub agents: Vec<Agent>,
    pub min_distance: f64,
    pub wall_stops: usize,
}

impl WorldState {
    pub fn robots(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.kind == AgentKind::Robot)
    }

    pub fn all_robots_done(&self) -> bool {
        self.robots().all(|a| a.done)
    }

    /// Trajectory CSV rows (`time,agent_id,kind,x,y,theta`) for this instant.
    pub fn trajectory_rows(&self) -> String {
        let mut s = String::new();
        for (i, a) in self.agents.iter().enumerate() {
            s.push_str(&format!(
                "{:?},{},{},{:?},{:?},{:?}\n",
                self.clock,
                i,
                a.kind.name(),
                a.pose.x,
                a.pose.y,
                a.pose.theta
            ));
        }
        s
    }
}

pub const TRAJECTORY_HEADER: &str = "time,agent_id,kind,x,y,theta";

fn overlaps(p: &Point, others: &[Point], min_dist: f64) -> bool {
    others.iter().any(|q| (q - p).norm() < min_dist)
}

fn sample_in<R: Rng>(
    rng: &mut R,
    region: &super::scenario::Region,
    taken: &[Point],
    min_dist: f64,
    ok: impl Fn(&Point) -> bool,
    what: &'static str,
) -> Result<Point, SimError> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = region.lerp(rng.gen(), rng.gen());
        if ok(&p) && !overlaps(&p, taken, min_dist) {
            return Ok(p);
        }
    }
    Err(SimError::PlacementFailed { what, attempts: PLACEMENT_ATTEMPTS })
}

struct Placement {
    group: usize,
    pose: RobotPose,
    goal: Point,
}

fn place_robots(cfg: &ScenarioConfig, env: &Environment, rng: &mut ChaCha8Rng) -> Result<Vec<Placement>, SimError> {
    let min_dist = 2.0 * cfg.safety_radius;
    let d_f = cfg.controller.d_f;
    let mut starts = Vec::new();
    let mut goals = Vec::new();
    let mut out = Vec::new();
    for (gi, g) in cfg.groups.iter().enumerate() {
        let heading = g.goal.center() - g.start.center();
        let theta = heading.y.atan2(heading.x);
        let dir = Vec2::new(theta.cos(), theta.sin());
        for _ in 0..g.count {
            let start = sample_in(
                rng,
                &g.start,
                &starts,
                min_dist,
                |p| env.planning.is_free_point(p) && env.planning.is_free_point(&(p + dir * d_f)),
                "robot start",
            )?;
            let goal = sample_in(rng, &g.goal, &goals, min_dist, |p| env.planning.is_free_point(p), "robot goal")?;
            starts.push(start);
            goals.push(goal);
            out.push(Placement { group: gi, pose: RobotPose::new(start.x, start.y, theta), goal });
        }
    }
    Ok(out)
}

fn cell_index(map: &GridMap, p: &Point) -> Option<usize> {
    map.cell_at(p).map(|c| map.index(c))
}

fn place_pedestrians(
    cfg: &ScenarioConfig,
    env: &Environment,
    rng: &mut ChaCha8Rng,
    taken: &mut Vec<Point>,
) -> Result<Vec<(RobotPose, Vec<Point>)>, SimError> {
    let map = &env.planning;
    let free: Vec<Cell> = map.free_cells().filter(|&c| !map.is_blocked(c)).collect();
    if free.is_empty() && cfg.pedestrians > 0 {
        return Err(SimError::PlacementFailed { what: "pedestrian", attempts: 0 });
    }
    let min_dist = 2.0 * cfg.safety_radius;
    let mut dij = Dijkstra::new(map.width() * map.height());
    let mut out = Vec::new();
    for _ in 0..cfg.pedestrians {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let s = map.cell_center(free[rng.gen_range(0..free.len())]);
            let g = map.cell_center(free[rng.gen_range(0..free.len())]);
            if overlaps(&s, taken, min_dist) || (g - s).norm() < 1.0 {
                continue;
            }
            let (si, gi) = (cell_index(map, &s).unwrap(), cell_index(map, &g).unwrap());
            let cells = dij.shortest_path(map, map.blocked_mask(), si, gi);
            if cells.is_empty() {
                continue;
            }
            let w = map.width();
            let route: Vec<Point> = cells.iter().map(|&i| map.cell_center(Cell::new(i % w, i / w))).collect();
            let ahead = route.get(1).copied().unwrap_or(g) - s;
            placed = Some((RobotPose::new(s.x, s.y, ahead.y.atan2(ahead.x)), route));
            break;
        }
        let (pose, route) = placed.ok_or(SimError::PlacementFailed { what: "pedestrian", attempts: PLACEMENT_ATTEMPTS })?;
        taken.push(pose.position());
        out.push((pose, route));
    }
    Ok(out)
}

/// Stream used for each robot's class draw, independent of placement.
fn class_rng(seed: u64, robot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + robot as u64);
    rng
}

/// Plans the classes of one robot and draws its reference path.
fn plan_robot(
    idx: usize,
    place: &Placement,
    group_size: usize,
    cfg: &ScenarioConfig,
    env: &Environment,
) -> Result<RobotState, SimError> {
    let p_d = place.pose.lookahead(cfg.controller.d_f);
    let found = find_topological_paths_with(&env.planning, &p_d, &place.goal, cfg.assign.m, &cfg.disc, &cfg.search)
        .map_err(|source| SimError::Plan { robot: idx, source })?;
    let paths = found.paths;
    let k = paths.len();
    let probabilities = match cfg.policy {
        Policy::Shortest => ProbabilityVector::delta(k, 0),
        Policy::UniformProbability => ProbabilityVector::uniform(k),
        Policy::Topological if k == 1 => ProbabilityVector::delta(1, 0),
        Policy::Topological => {
            let params = cfg.assign_for(group_size);
            let costs = compute_class_costs(&paths, env.density(cfg.density_mode), &params);
            solve(&costs, &params)?
        }
    };
    let class = sample_class(&probabilities, &mut class_rng(cfg.seed, idx));
    let reference = paths[class].clone();
    let prefix = segment_signature(&reference.start().position(&cfg.disc), &p_d, &env.planning);
    Ok(RobotState {
        group: place.group,
        probabilities,
        class_signatures: paths.iter().map(|p| p.signature.clone()).collect(),
        class,
        plan: reference.clone(),
        reference,
        plan_t0: 0.0,
        prefix,
        last_replan: 0.0,
        sensed: Vec::new(),
        replans: 0,
        replan_failures: 0,
    })
}

/// Places every agent and gives each robot its reference path.
pub fn init_scenario(cfg: &ScenarioConfig, env: &Environment) -> Result<WorldState, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let placements = place_robots(cfg, env, &mut rng)?;
    let mut taken: Vec<Point> = placements.iter().map(|p| p.pose.position()).collect();
    let peds = place_pedestrians(cfg, env, &mut rng, &mut taken)?;

    let robots: Vec<RobotState> = placements
        .par_iter()
        .enumerate()
        .map(|(i, pl)| plan_robot(i, pl, cfg.groups[pl.group].count, cfg, env))
        .collect::<Result<_, _>>()?;

    let mut agents = Vec::with_capacity(robots.len() + peds.len());
    for (pl, state) in placements.iter().zip(robots) {
        let goal = state.reference.goal().position(&cfg.disc);
        agents.push(Agent {
            kind: AgentKind::Robot,
            pose: pl.pose,
            velocity: Vec2::zeros(),
            goal,
            done: false,
            finish_time: None,
            avoidance_time: 0.0,
            behavior: Behavior::Robot(Box::new(state)),
        });
    }
    for (pose, route) in peds {
        agents.push(Agent {
            kind: AgentKind::Pedestrian,
            pose,
            velocity: Vec2::zeros(),
            goal: *route.last().unwrap(),
            done: false,
            finish_time: None,
            avoidance_time: 0.0,
            behavior: Behavior::Pedestrian(PedestrianState::new(route)),
        });
    }
    let mut world = WorldState { clock: 0.0, steps: 0, agents, min_distance: f64::INFINITY, wall_stops: 0 };
    world.min_distance = robot_min_distance(&world);
    Ok(world)
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    position: Point,
    velocity: Vec2,
    active: bool,
}

fn sense(me: usize, pos: &Point, snap: &[Snapshot], radius: f64) -> Vec<usize> {
    snap.iter()
        .enumerate()
        .filter(|&(j, s)| j != me && s.active && (s.position - pos).norm() <= radius)
        .map(|(j, _)| j)
        .collect()
}

fn robot_decide(
    me: usize,
    agent: &mut Agent,
    snap: &[Snapshot],
    predictions: &[OnceLock<OccupancyField>],
    clock: f64,
    cfg: &ScenarioConfig,
    env: &Environment,
) -> ControlOutput {
    let disc = &cfg.disc;
    let pose = agent.pose;
    let p_d = pose.lookahead(cfg.controller.d_f);
    let Behavior::Robot(r) = &mut agent.behavior else { unreachable!() };
    let sensed = sense(me, &pose.position(), snap, cfg.replan.sense_radius);
    let newcomer = sensed.iter().any(|j| !r.sensed.contains(j));
    let due = clock - r.last_replan >= cfg.replan_period - 1e-9;
    if newcomer || due {
        r.last_replan = clock;
        let on_schedule = (r.plan.position_at(clock - r.plan_t0) - p_d).norm() <= disc.dr;
        if !(sensed.is_empty() && on_schedule) {
            let goal = r.reference.goal();
            let parity = (goal.x + goal.y).rem_euclid(2);
            if let Some((x, y)) = snap_to_lattice(&p_d, disc, &env.planning, Some(parity)) {
                // An agent's prediction does not depend on who observes it.
                let singles: Vec<&OccupancyField> = sensed
                    .iter()
                    .map(|&j| {
                        predictions[j].get_or_init(|| {
                            let obs = Observation {
                                position: snap[j].position,
                                velocity: snap[j].velocity,
                                radius: 2.0 * cfg.safety_radius,
                            };
                            predict_agent(&obs, &cfg.replan.kernel, cfg.replan.m_max, disc, 0)
                        })
                    })
                    .collect();
                let field = merge_fields(&singles, disc, 0, cfg.replan.m_max);
                let mut prefix = r.prefix.clone();
                prefix.xor_assign(&segment_signature(&p_d, &disc.position(x, y), &env.planning));
                let start = crate::topo::SpacetimeVertex::new(x, y, 0);
                r.replans += 1;
                match replan(start, &prefix, &r.reference, &field, &cfg.replan, disc, &env.planning) {
                    Ok(res) => {
                        debug_assert_eq!(prefix.compose(&res.path.signature).unwrap(), r.reference.signature);
                        r.plan = res.path;
                        r.plan_t0 = clock;
                    }
                    Err(_) => r.replan_failures += 1,
                }
            }
        }
    }
    r.sensed = sensed;

    let target = r.plan.position_at(clock - r.plan_t0 + disc.dt);
    let near: Vec<Point> = r.sensed.iter().map(|&j| snap[j].position).collect();
    let obstacle = env.raw.nearest_obstacle_point(&pose.position(), cfg.controller.d_e + env.raw.resolution());
    crate::control::command(&pose, &target, &near, Some(&obstacle), disc.v_max, &cfg.controller)
}

fn pedestrian_decide(
    me: usize,
    agent: &mut Agent,
    snap: &[Snapshot],
    clock: f64,
    cfg: &ScenarioConfig,
    env: &Environment,
) -> ControlOutput {
    let params = &cfg.controller;
    let pose = agent.pose;
    let p_d = pose.lookahead(params.d_f);
    let Behavior::Pedestrian(ped) = &mut agent.behavior else { unreachable!() };
    ped.advance(&p_d, 1.0);
    let lead = cfg.pedestrian_speed / params.c_s;
    let target = ped.point_at(ped.progress + lead);
    let v_track = tracking_velocity(&pose, &target, params);
    if ped.progress >= ped.mark.0 + STALL_STEP {
        ped.mark = (ped.progress, clock);
    }
    // A pedestrian stuck past its patience pushes through.
    let near: Vec<Point> = if clock - ped.mark.1 > cfg.pedestrian_patience {
        Vec::new()
    } else {
        sense(me, &pose.position(), snap, params.r_c).iter().map(|&j| snap[j].position).collect()
    };
    let mut rep = cone_repulsion(&pose, &near, params);
    let repulsion_active = rep != Vec2::zeros();
    if repulsion_active {
        let right = Vec2::new(pose.theta.sin(), -pose.theta.cos());
        rep += right * (cfg.pedestrian_sidestep * rep.norm());
    }
    let obstacle = env.raw.nearest_obstacle_point(&pose.position(), params.d_e + env.raw.resolution());
    let (v, cancel_active) = obstacle_cancel(&v_track, &(v_track + rep), &pose, &obstacle, params);
    let v_final = saturate(&v, cfg.pedestrian_speed);
    ControlOutput {
        v_track,
        v_final,
        wheels: to_wheel_speeds(&v_final, &pose, params),
        repulsion_active,
        cancel_active,
    }
}

fn robot_min_distance(world: &WorldState) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in world.agents.iter().enumerate() {
        if a.done || a.kind != AgentKind::Robot {
            continue;
        }
        for (j, b) in world.agents.iter().enumerate() {
            if i == j || b.done || (b.kind == AgentKind::Robot && j < i) {
                continue;
            }
            best = best.min((a.pose.position() - b.pose.position()).norm());
        }
    }
    best
}

/// Advances the world by one controller step.
pub fn step(world: &mut WorldState, cfg: &ScenarioConfig, env: &Environment) {
    let clock = world.clock;
    let snap: Vec<Snapshot> = world
        .agents
        .iter()
        .map(|a| Snapshot { position: a.pose.position(), velocity: a.velocity, active: !a.done })
        .collect();
    let predictions: Vec<OnceLock<OccupancyField>> = snap.iter().map(|_| OnceLock::new()).collect();
    let commands: Vec<Option<ControlOutput>> = world
        .agents
        .par_iter_mut()
        .enumerate()
        .map(|(i, a)| {
            if a.done {
                return None;
            }
            Some(match a.kind {
                AgentKind::Robot => robot_decide(i, a, &snap, &predictions, clock, cfg, env),
                AgentKind::Pedestrian => pedestrian_decide(i, a, &snap, clock, cfg, env),
            })
        })
        .collect();

    world.steps += 1;
    world.clock = world.steps as f64 * cfg.sim_dt;
    let d_f = cfg.controller.d_f;
    for (a, cmd) in world.agents.iter_mut().zip(commands) {
        let Some(cmd) = cmd else { continue };
        if cmd.repulsion_active || cmd.cancel_active {
            a.avoidance_time += cfg.sim_dt;
        }
        let old = a.pose;
        let mut next = integrate_unicycle(&old, &cmd.wheels, cfg.sim_dt);
        if !env.raw.is_open_point(&next.position()) {
            world.wall_stops += 1;
            let turn = WheelCommand { u: 0.0, ..cmd.wheels };
            next = integrate_unicycle(&old, &turn, cfg.sim_dt);
        }
        a.pose = next;
        a.velocity = Vec2::new(next.theta.cos(), next.theta.sin()) * next.v;
        let p_d = next.lookahead(d_f);
        if let Behavior::Robot(r) = &mut a.behavior {
            r.prefix.xor_assign(&segment_signature(&old.lookahead(d_f), &p_d, &env.planning));
        }
        if (p_d - a.goal).norm() <= cfg.goal_tolerance {
            a.done = true;
            a.finish_time = Some(world.clock);
            a.velocity = Vec2::zeros();
            a.pose.v = 0.0;
        }
    }
    world.min_distance = world.min_distance.min(robot_min_distance(world));
}

/// Metrics for the current state; robots still underway count at the
/// time limit.
pub fn collect_metrics(world: &WorldState, cfg: &ScenarioConfig) -> RunMetrics {
    let robots: Vec<&Agent> = world.robots().collect();
    let travel_times: Vec<f64> = robots.iter().map(|a| a.finish_time.unwrap_or(cfg.max_sim_time)).collect();
    let avoidance_times: Vec<f64> = robots.iter().map(|a| a.avoidance_time).collect();
    let states: Vec<&RobotState> = robots.iter().filter_map(|a| a.robot()).collect();
    RunMetrics {
        avg_travel: mean(&travel_times),
        max_travel: travel_times.iter().copied().fold(0.0, f64::max),
        avg_avoidance: mean(&avoidance_times),
        min_distance: world.min_distance,
        timed_out: robots.iter().filter(|a| !a.done).count(),
        classes: states.iter().map(|r| r.class).collect(),
        replans: states.iter().map(|r| r.replans).sum(),
        replan_failures: states.iter().map(|r| r.replan_failures).sum(),
        wall_stops: world.wall_stops,
        steps: world.steps,
        travel_times,
        avoidance_times,
    }
}

/// Steps until every robot arrives or the time limit; `observe` sees the
/// world after initialization and after every step.
pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    env: &Environment,
    mut observe: impl FnMut(&WorldState),
) -> Result<RunMetrics, SimError> {
    let mut world = init_scenario(cfg, env)?;
    observe(&world);
    let max_steps = (cfg.max_sim_time / cfg.sim_dt - 1e-9).ceil() as usize;
    while world.steps < max_steps && !world.all_robots_done() {
        step(&mut world, cfg, env);
        observe(&world);
    }
    Ok(collect_metrics(&world, cfg))
}

pub fn run_scenario(cfg: &ScenarioConfig, env: &Environment) -> Result<RunMetrics, SimError> {
    run_scenario_with(cfg, env, |_| {})
}
