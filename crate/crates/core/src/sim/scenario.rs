use std::fmt;
use std::str::FromStr;

use crate::assign::{AssignModel, AssignParams, CostType};
use crate::config::{ConfigError, KvConfig};
use crate::control::ControllerParams;
use crate::replan::{DiffusionKernel, ReplanParams};
use crate::topo::{DiscretizationParams, SearchLimits};
use crate::Point;

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0: x0.min(x1), y0: y0.min(y1), x1: x0.max(x1), y1: y0.max(y1) }
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn lerp(&self, u: f64, v: f64) -> Point {
        Point::new(self.x0 + u * (self.x1 - self.x0), self.y0 + v * (self.y1 - self.y0))
    }

    fn from_list(key: &str, v: &[f64]) -> Result<Self, ConfigError> {
        match v {
            [a, b, c, d] => Ok(Self::new(*a, *b, *c, *d)),
            _ => Err(ConfigError::BadValue { key: key.into(), value: format!("{v:?}") }),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.x0, self.y0, self.x1, self.y1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotGroup {
    pub start: Region,
    pub goal: Region,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Sample the class from the assignment solver's probabilities.
    Topological,
    /// Always take the cheapest class.
    Shortest,
    /// Sample every found class with equal probability.
    UniformProbability,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Topological, Policy::Shortest, Policy::UniformProbability];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Topological => "topological",
            Policy::Shortest => "shortest",
            Policy::UniformProbability => "uniform_probability",
        }
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which traffic density the assignment sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    /// Estimated from random shortest paths.
    Estimated,
    /// Constant over free cells.
    Uniform,
}

impl FromStr for DensityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "estimated" => Ok(Self::Estimated),
            "uniform" => Ok(Self::Uniform),
            _ => Err(format!("unknown density mode `{s}`")),
        }
    }
}

impl fmt::Display for DensityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Estimated => "estimated",
            Self::Uniform => "uniform",
        })
    }
}

fn model_name(m: AssignModel) -> &'static str {
    match m {
        AssignModel::Complete => "complete",
        AssignModel::TwoRobot => "two_robot",
        AssignModel::Ensemble => "ensemble",
    }
}

fn parse_model(key: &str, s: &str) -> Result<AssignModel, ConfigError> {
    match s {
        "complete" => Ok(AssignModel::Complete),
        "two_robot" => Ok(AssignModel::TwoRobot),
        "ensemble" => Ok(AssignModel::Ensemble),
        _ => Err(ConfigError::BadValue { key: key.into(), value: s.into() }),
    }
}

fn parse_cost_type(key: &str, s: &str) -> Result<CostType, ConfigError> {
    match s {
        "average" => Ok(CostType::Average),
        "maximum" => Ok(CostType::Maximum),
        _ => Err(ConfigError::BadValue { key: key.into(), value: s.into() }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Map file, resolved by the caller.
    pub map: Option<String>,
    pub groups: Vec<RobotGroup>,
    pub pedestrians: usize,
    pub policy: Policy,
    pub density_mode: DensityMode,
    /// `n` and `q` inside are replaced when the overrides below are unset.
    pub assign: AssignParams,
    /// Contending-robot estimate; `None` uses the robot's group size.
    pub contending: Option<usize>,
    /// Distant-agent estimate; `None` uses the pedestrian count.
    pub distant: Option<f64>,
    pub replan: ReplanParams,
    /// Seconds between scheduled replans.
    pub replan_period: f64,
    pub controller: ControllerParams,
    pub disc: DiscretizationParams,
    pub search: SearchLimits,
    pub seed: u64,
    pub sim_dt: f64,
    pub safety_radius: f64,
    pub goal_tolerance: f64,
    pub max_sim_time: f64,
    pub pedestrian_speed: f64,
    /// Sideways share added to a pedestrian's repulsion, toward its right.
    pub pedestrian_sidestep: f64,
    /// Seconds without route progress after which a pedestrian ignores
    /// other agents until it moves again.
    pub pedestrian_patience: f64,
    pub density_paths: usize,
    pub footprint_radius: f64,
    pub density_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let disc = DiscretizationParams::default();
        let safety_radius = 0.2;
        Self {
            map: None,
            groups: Vec::new(),
            pedestrians: 0,
            policy: Policy::Topological,
            density_mode: DensityMode::Estimated,
            assign: AssignParams { corridor_width: 2.0 * safety_radius, ..AssignParams::default() },
            contending: None,
            distant: None,
            replan: ReplanParams::default(),
            replan_period: 1.0,
            controller: ControllerParams::default(),
            search: SearchLimits::default(),
            seed: 0,
            sim_dt: disc.dt / 4.0,
            disc,
            safety_radius,
            goal_tolerance: 0.2,
            max_sim_time: 120.0,
            pedestrian_speed: 0.8,
            pedestrian_sidestep: 0.5,
            pedestrian_patience: 2.0,
            density_paths: 5000,
            footprint_radius: 0.3,
            density_seed: 0,
        }
    }
}

const KNOWN: &[&str] = &[
    "map",
    "pedestrians",
    "policy",
    "density.mode",
    "density.paths",
    "density.footprint",
    "density.seed",
    "assign.a",
    "assign.b",
    "assign.q",
    "assign.n",
    "assign.m",
    "assign.corridor_width",
    "assign.cost_type",
    "assign.model",
    "replan.alpha",
    "replan.iota",
    "replan.m_max",
    "replan.sense_radius",
    "replan.max_expansions",
    "replan.period",
    "replan.kernel",
    "control.d_f",
    "control.c_s",
    "control.c_a",
    "control.c_e",
    "control.d_e",
    "control.r_c",
    "control.alpha_c_deg",
    "control.wheel_base",
    "disc.v_max",
    "disc.dt",
    "search.max_expansions",
    "search.t_cap_factor",
    "search.min_layers",
    "seed",
    "sim.dt",
    "sim.safety_radius",
    "sim.goal_tolerance",
    "sim.max_time",
    "pedestrian.speed",
    "pedestrian.sidestep",
    "pedestrian.patience",
];

impl ScenarioConfig {
    pub fn robot_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        self.assign.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.sim_dt > 0.0 && self.sim_dt <= self.disc.dt) {
            return bad("sim.dt must be in (0, disc.dt]");
        }
        let ratio = self.disc.dt / self.sim_dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("sim.dt must divide disc.dt");
        }
        if !(self.replan.alpha > 0.0 && self.replan.alpha <= 1.0) {
            return bad("replan.alpha must be in (0, 1]");
        }
        if !(self.replan.iota > 0.0) {
            return bad("replan.iota must be positive");
        }
        let c = &self.controller;
        if ![c.d_f, c.c_s, c.c_a, c.c_e, c.d_e, c.r_c, c.alpha_c, c.wheel_base].iter().all(|v| *v > 0.0)
            || c.alpha_c >= std::f64::consts::PI
        {
            return bad("controller gains must be positive and alpha_c below 180 degrees");
        }
        if !(self.safety_radius > 0.0 && self.goal_tolerance > 0.0 && self.max_sim_time > 0.0) {
            return bad("safety radius, goal tolerance and max time must be positive");
        }
        if !(self.pedestrian_speed > 0.0 && self.replan_period > 0.0) {
            return bad("pedestrian speed and replan period must be positive");
        }
        if !(self.pedestrian_patience >= 0.0) {
            return bad("pedestrian patience must be non-negative");
        }
        if self.density_paths == 0 {
            return bad("density.paths must be at least 1");
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        kv.check_known(KNOWN, &["group."])?;
        let d = Self::default();
        let mut groups = Vec::new();
        for i in 0.. {
            let key = |f: &str| format!("group.{i}.{f}");
            if !kv.contains(&key("count")) {
                break;
            }
            let start = kv.parse_list(&key("start"))?.ok_or_else(|| ConfigError::Missing(key("start")))?;
            let goal = kv.parse_list(&key("goal"))?.ok_or_else(|| ConfigError::Missing(key("goal")))?;
            groups.push(RobotGroup {
                start: Region::from_list(&key("start"), &start)?,
                goal: Region::from_list(&key("goal"), &goal)?,
                count: kv.require(&key("count"))?,
            });
        }
        for k in kv.keys().filter(|k| k.starts_with("group.")) {
            let ok = k
                .split('.')
                .nth(1)
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| i < groups.len())
                && ["start", "goal", "count"].iter().any(|f| k.ends_with(&format!(".{f}")));
            if !ok {
                return Err(ConfigError::Unknown(k.to_string()));
            }
        }

        let auto = |key: &str| kv.get(key).is_none_or(|v| v == "auto");
        let policy = kv
            .get("policy")
            .map(|s| s.parse::<Policy>().map_err(ConfigError::Invalid))
            .transpose()?
            .unwrap_or(d.policy);
        let density_mode = kv
            .get("density.mode")
            .map(|s| s.parse::<DensityMode>().map_err(ConfigError::Invalid))
            .transpose()?
            .unwrap_or(d.density_mode);
        let v_max = kv.parse_or("disc.v_max", d.disc.v_max)?;
        let dt = kv.parse_or("disc.dt", d.disc.dt)?;
        let disc = DiscretizationParams::new(v_max, dt).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let safety_radius = kv.parse_or("sim.safety_radius", d.safety_radius)?;
        let kernel = match kv.parse_list("replan.kernel")? {
            None => d.replan.kernel,
            Some(v) if v.len() == 3 => DiffusionKernel { center: v[0], edge: v[1], corner: v[2] },
            Some(v) => {
                return Err(ConfigError::BadValue { key: "replan.kernel".into(), value: format!("{v:?}") })
            }
        };

        let cfg = Self {
            map: kv.get("map").map(str::to_string),
            groups,
            pedestrians: kv.parse_or("pedestrians", d.pedestrians)?,
            policy,
            density_mode,
            assign: AssignParams {
                a: kv.parse_or("assign.a", d.assign.a)?,
                b: kv.parse_or("assign.b", d.assign.b)?,
                q: 0.0,
                n: 1,
                m: kv.parse_or("assign.m", d.assign.m)?,
                corridor_width: kv.parse_or("assign.corridor_width", 2.0 * safety_radius)?,
                cost_type: kv
                    .get("assign.cost_type")
                    .map(|s| parse_cost_type("assign.cost_type", s))
                    .transpose()?
                    .unwrap_or(d.assign.cost_type),
                model: kv
                    .get("assign.model")
                    .map(|s| parse_model("assign.model", s))
                    .transpose()?
                    .unwrap_or(d.assign.model),
            },
            contending: if auto("assign.n") { None } else { Some(kv.require("assign.n")?) },
            distant: if auto("assign.q") { None } else { Some(kv.require("assign.q")?) },
            replan: ReplanParams {
                alpha: kv.parse_or("replan.alpha", d.replan.alpha)?,
                iota: kv.parse_or("replan.iota", d.replan.iota)?,
                m_max: kv.parse_or("replan.m_max", d.replan.m_max)?,
                sense_radius: kv.parse_or("replan.sense_radius", d.replan.sense_radius)?,
                kernel,
                max_expansions: kv.parse_or("replan.max_expansions", d.replan.max_expansions)?,
            },
            replan_period: kv.parse_or("replan.period", d.replan_period)?,
            controller: ControllerParams {
                d_f: kv.parse_or("control.d_f", d.controller.d_f)?,
                c_s: kv.parse_or("control.c_s", d.controller.c_s)?,
                c_a: kv.parse_or("control.c_a", d.controller.c_a)?,
                c_e: kv.parse_or("control.c_e", d.controller.c_e)?,
                d_e: kv.parse_or("control.d_e", d.controller.d_e)?,
                r_c: kv.parse_or("control.r_c", d.controller.r_c)?,
                alpha_c: kv.parse_or("control.alpha_c_deg", d.controller.alpha_c.to_degrees())?.to_radians(),
                wheel_base: kv.parse_or("control.wheel_base", d.controller.wheel_base)?,
            },
            search: SearchLimits {
                t_cap_factor: kv.parse_or("search.t_cap_factor", d.search.t_cap_factor)?,
                min_layers: kv.parse_or("search.min_layers", d.search.min_layers)?,
                max_expansions: kv.parse_or("search.max_expansions", d.search.max_expansions)?,
            },
            seed: kv.parse_or("seed", d.seed)?,
            sim_dt: kv.parse_or("sim.dt", disc.dt / 4.0)?,
            disc,
            safety_radius,
            goal_tolerance: kv.parse_or("sim.goal_tolerance", d.goal_tolerance)?,
            max_sim_time: kv.parse_or("sim.max_time", d.max_sim_time)?,
            pedestrian_speed: kv.parse_or("pedestrian.speed", d.pedestrian_speed)?,
            pedestrian_sidestep: kv.parse_or("pedestrian.sidestep", d.pedestrian_sidestep)?,
            pedestrian_patience: kv.parse_or("pedestrian.patience", d.pedestrian_patience)?,
            density_paths: kv.parse_or("density.paths", d.density_paths)?,
            footprint_radius: kv.parse_or("density.footprint", d.footprint_radius)?,
            density_seed: kv.parse_or("density.seed", d.density_seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_kv(&KvConfig::parse(text)?)
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::default();
        if let Some(m) = &self.map {
            kv.set("map", m);
        }
        for (i, g) in self.groups.iter().enumerate() {
            kv.set(format!("group.{i}.start"), g.start);
            kv.set(format!("group.{i}.goal"), g.goal);
            kv.set(format!("group.{i}.count"), g.count);
        }
        kv.set("pedestrians", self.pedestrians);
        kv.set("policy", self.policy);
        kv.set("density.mode", self.density_mode);
        kv.set("density.paths", self.density_paths);
        kv.set("density.footprint", self.footprint_radius);
        kv.set("density.seed", self.density_seed);
        kv.set("assign.a", self.assign.a);
        kv.set("assign.b", self.assign.b);
        kv.set("assign.m", self.assign.m);
        kv.set("assign.n", self.contending.map_or("auto".to_string(), |n| n.to_string()));
        kv.set("assign.q", self.distant.map_or("auto".to_string(), |q| q.to_string()));
        kv.set("assign.corridor_width", self.assign.corridor_width);
        kv.set(
            "assign.cost_type",
            match self.assign.cost_type {
                CostType::Average => "average",
                CostType::Maximum => "maximum",
            },
        );
        kv.set("assign.model", model_name(self.assign.model));
        kv.set("replan.alpha", self.replan.alpha);
        kv.set("replan.iota", self.replan.iota);
        kv.set("replan.m_max", self.replan.m_max);
        kv.set("replan.sense_radius", self.replan.sense_radius);
        kv.set("replan.max_expansions", self.replan.max_expansions);
        kv.set("replan.period", self.replan_period);
        let k = self.replan.kernel;
        kv.set("replan.kernel", format!("{} {} {}", k.center, k.edge, k.corner));
        let c = &self.controller;
        kv.set("control.d_f", c.d_f);
        kv.set("control.c_s", c.c_s);
        kv.set("control.c_a", c.c_a);
        kv.set("control.c_e", c.c_e);
        kv.set("control.d_e", c.d_e);
        kv.set("control.r_c", c.r_c);
        kv.set("control.alpha_c_deg", c.alpha_c.to_degrees());
        kv.set("control.wheel_base", c.wheel_base);
        kv.set("disc.v_max", self.disc.v_max);
        kv.set("disc.dt", self.disc.dt);
        kv.set("search.max_expansions", self.search.max_expansions);
        kv.set("search.t_cap_factor", self.search.t_cap_factor);
        kv.set("search.min_layers", self.search.min_layers);
        kv.set("seed", self.seed);
        kv.set("sim.dt", self.sim_dt);
        kv.set("sim.safety_radius", self.safety_radius);
        kv.set("sim.goal_tolerance", self.goal_tolerance);
        kv.set("sim.max_time", self.max_sim_time);
        kv.set("pedestrian.speed", self.pedestrian_speed);
        kv.set("pedestrian.sidestep", self.pedestrian_sidestep);
        kv.set("pedestrian.patience", self.pedestrian_patience);
        kv
    }

    /// Assignment parameters for a robot in a group of `group_size`.
    pub fn assign_for(&self, group_size: usize) -> AssignParams {
        AssignParams {
            n: self.contending.unwrap_or(group_size).max(1),
            q: self.distant.unwrap_or(self.pedestrians as f64),
            ..self.assign
        }
    }
}
