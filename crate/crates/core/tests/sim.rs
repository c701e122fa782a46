mod common;

use topoflow::gridmap::GridMap;
use topoflow::sim::{
    init_scenario, run_scenario, run_scenario_with, step, Environment, Policy, Region, RobotGroup, RunMetrics,
    ScenarioConfig, WorldState, TRAJECTORY_HEADER,
};
use topoflow::topo::find_topological_paths_with;
use topoflow::Point;

use common::{fixture, map_with_blocks, open_map};

fn group(start: Region, goal: Region, count: usize) -> RobotGroup {
    RobotGroup { start, goal, count }
}

fn corridor_config(robots: usize, pedestrians: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        groups: vec![group(Region::new(0.5, 2.75, 3.0, 4.25), Region::new(13.0, 2.75, 15.5, 4.25), robots)],
        pedestrians,
        seed,
        density_paths: 500,
        max_sim_time: 60.0,
        ..ScenarioConfig::default()
    }
}

fn trajectory(cfg: &ScenarioConfig, env: &Environment) -> (RunMetrics, String) {
    let mut log = format!("{TRAJECTORY_HEADER}\n");
    let m = run_scenario_with(cfg, env, |w| log.push_str(&w.trajectory_rows())).unwrap();
    (m, log)
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = corridor_config(4, 4, 3);
    let env = Environment::new(fixture("two_corridor"), &cfg).unwrap();
    let (a, ta) = trajectory(&cfg, &env);
    let (b, tb) = trajectory(&cfg, &env);
    assert_eq!(a, b);
    assert_eq!(a.csv_row(4, "topological", 3), b.csv_row(4, "topological", 3));
    assert_eq!(ta, tb);
}

#[test]
fn invariants_hold_every_step() {
    let cfg = corridor_config(6, 6, 5);
    let env = Environment::new(fixture("two_corridor"), &cfg).unwrap();
    let mut prev: Option<WorldState> = None;
    let metrics = run_scenario_with(&cfg, &env, |w| {
        for a in &w.agents {
            assert!(env.raw.is_open_point(&a.pose.position()), "center in a wall at t={}", w.clock);
        }
        if let Some(p) = &prev {
            assert!((w.clock - p.clock - cfg.sim_dt).abs() < 1e-12);
            for (old, new) in p.agents.iter().zip(&w.agents) {
                if old.done {
                    assert!(new.done);
                    assert_eq!(old.pose, new.pose);
                    assert_eq!(old.finish_time, new.finish_time);
                }
            }
        }
        prev = Some(w.clone());
    })
    .unwrap();
    let n = metrics.travel_times.len() as f64;
    let sum: f64 = metrics.travel_times.iter().sum();
    assert!((sum / n - metrics.avg_travel).abs() < 1e-9);
    assert!(metrics.max_travel >= metrics.avg_travel && metrics.avg_travel >= 0.0);
    assert_eq!(metrics.timed_out, 0);
}

#[test]
fn single_robot_arrives_near_its_base_cost() {
    let map = open_map(48, 12, 0.25);
    let cfg = ScenarioConfig {
        groups: vec![group(Region::new(1.0, 1.5, 1.0, 1.5), Region::new(11.0, 1.5, 11.0, 1.5), 1)],
        policy: Policy::Shortest,
        density_paths: 100,
        ..ScenarioConfig::default()
    };
    let env = Environment::new(map, &cfg).unwrap();
    let world = init_scenario(&cfg, &env).unwrap();
    let r = world.agents[0].robot().unwrap();
    assert_eq!(r.class, 0);
    let base = r.reference.base_cost;
    let m = run_scenario(&cfg, &env).unwrap();
    assert_eq!((m.avg_travel, m.max_travel), (m.travel_times[0], m.travel_times[0]));
    assert!((m.avg_travel - base).abs() <= 0.1 * base, "travel {} base {base}", m.avg_travel);
}

#[test]
fn shortest_policy_takes_the_cheapest_class() {
    let cfg = corridor_config(1, 0, 2);
    let cfg = ScenarioConfig { policy: Policy::Shortest, ..cfg };
    let env = Environment::new(fixture("two_corridor"), &cfg).unwrap();
    let world = init_scenario(&cfg, &env).unwrap();
    let a = &world.agents[0];
    let r = a.robot().unwrap();
    let p_d = a.pose.lookahead(cfg.controller.d_f);
    let found =
        find_topological_paths_with(&env.planning, &p_d, &a.goal, cfg.assign.m, &cfg.disc, &cfg.search).unwrap();
    assert_eq!(r.class, 0);
    assert_eq!(r.reference.vertices, found.paths[0].vertices);
}

#[test]
fn head_on_robots_keep_their_distance() {
    let map = open_map(40, 24, 0.25);
    let cfg = ScenarioConfig {
        groups: vec![
            group(Region::new(1.0, 3.0, 1.0, 3.0), Region::new(9.0, 3.0, 9.0, 3.0), 1),
            group(Region::new(9.0, 3.0, 9.0, 3.0), Region::new(1.0, 3.0, 1.0, 3.0), 1),
        ],
        density_paths: 100,
        max_sim_time: 40.0,
        ..ScenarioConfig::default()
    };
    let env = Environment::new(map, &cfg).unwrap();
    let m = run_scenario(&cfg, &env).unwrap();
    assert_eq!(m.timed_out, 0);
    assert!(m.min_distance >= cfg.safety_radius, "min distance {}", m.min_distance);
}

#[test]
fn empty_world_only_advances_the_clock() {
    let cfg = ScenarioConfig { density_paths: 10, ..ScenarioConfig::default() };
    let env = Environment::new(open_map(8, 8, 0.25), &cfg).unwrap();
    let mut world = init_scenario(&cfg, &env).unwrap();
    assert!(world.agents.is_empty());
    for k in 1..=5 {
        step(&mut world, &cfg, &env);
        assert_eq!(world.clock, k as f64 * cfg.sim_dt);
        assert!(world.agents.is_empty());
    }
    let m = run_scenario(&cfg, &env).unwrap();
    assert_eq!((m.travel_times.len(), m.timed_out), (0, 0));
}

#[test]
fn initial_state_is_reproducible() {
    let cfg = corridor_config(10, 5, 8);
    let env = Environment::new(fixture("two_corridor"), &cfg).unwrap();
    let a = init_scenario(&cfg, &env).unwrap();
    let b = init_scenario(&cfg, &env).unwrap();
    assert_eq!(a.trajectory_rows(), b.trajectory_rows());
    let classes = |w: &WorldState| w.robots().map(|r| r.robot().unwrap().class).collect::<Vec<_>>();
    assert_eq!(classes(&a), classes(&b));
    // The other policy sees the same placements.
    let shortest = init_scenario(&ScenarioConfig { policy: Policy::Shortest, ..cfg.clone() }, &env).unwrap();
    assert_eq!(a.trajectory_rows(), shortest.trajectory_rows());
}

#[test]
fn class_draws_follow_solver_probabilities() {
    // Pillar centered between start and goal, so both classes cost about the same.
    let map: GridMap = map_with_blocks(40, 21, 0.25, &[(18, 8, 22, 13)]);
    let cfg = ScenarioConfig {
        groups: vec![group(Region::new(0.75, 2.0, 1.75, 3.25), Region::new(8.25, 2.0, 9.25, 3.25), 2)],
        pedestrians: 0,
        density_paths: 200,
        ..ScenarioConfig::default()
    };
    let env = Environment::new(map, &cfg).unwrap();
    let (mut hits, mut expected, mut draws) = (0usize, 0.0, 0usize);
    for seed in 0..5000 {
        let world = init_scenario(&ScenarioConfig { seed, ..cfg.clone() }, &env).unwrap();
        for a in world.robots() {
            let r = a.robot().unwrap();
            assert_eq!(r.probabilities.len(), 2);
            hits += (r.class == 0) as usize;
            expected += r.probabilities[0];
            draws += 1;
        }
    }
    let (freq, p1) = (hits as f64 / draws as f64, expected / draws as f64);
    assert!((0.05..0.95).contains(&p1), "degenerate instance: P1 = {p1}");
    assert!((freq - p1).abs() <= 0.02, "frequency {freq} vs P1 {p1}");
}

#[test]
fn placement_failure_is_reported() {
    let cfg = ScenarioConfig {
        groups: vec![group(Region::new(1.0, 1.0, 1.05, 1.05), Region::new(5.0, 1.0, 6.0, 1.5), 3)],
        density_paths: 10,
        ..ScenarioConfig::default()
    };
    let env = Environment::new(open_map(32, 8, 0.25), &cfg).unwrap();
    assert!(init_scenario(&cfg, &env).is_err());
    let start = Point::new(1.0, 1.0);
    assert!(env.planning.is_free_point(&start));
}
