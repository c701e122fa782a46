mod common;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topoflow::gridmap::GridMap;
use topoflow::replan::{
    merge_fields, occupancy_edge_cost, path_occupancy_cost, predict_agent, predict_occupancy, replan, DiffusionKernel,
    Observation, OccupancyField, ReplanParams,
};
use topoflow::topo::{
    edge_cost, find_topological_paths, polyline_signature, segment_signature, successors, DiscretizationParams,
    H2Signature, SpacetimePath, SpacetimeVertex,
};
use topoflow::{Point, Vec2};

use common::{blocked_corridor, distance_to_polyline, map_with_blocks};

/// 6 m x 3 m room with a 0.5 m pillar in the middle.
fn pillar_room() -> GridMap {
    map_with_blocks(24, 12, 0.25, &[(11, 5, 13, 7)]).with_clearance(0.2)
}

fn reference(map: &GridMap, disc: &DiscretizationParams) -> SpacetimePath {
    let found = find_topological_paths(map, &Point::new(0.6, 1.5), &Point::new(5.4, 1.5), 2, disc).unwrap();
    found.paths[0].clone()
}

/// Stationary probability-1 disk on the reference, ahead of the pillar.
fn blob_on(reference: &SpacetimePath, disc: &DiscretizationParams) -> OccupancyField {
    let p = reference
        .positions()
        .into_iter()
        .min_by(|a, b| (a.x - 2.25).abs().total_cmp(&(b.x - 2.25).abs()))
        .unwrap();
    let obs = Observation { position: p, velocity: Vec2::zeros(), radius: 0.3 };
    predict_agent(&obs, &DiffusionKernel::IDENTITY, 12, disc, 0)
}

#[derive(PartialEq)]
struct Cost(f64);
impl Eq for Cost {}
impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Uniform-cost search over (x, y, t, signature) with waits. Layers past
/// the field horizon are folded, which is exact because every later edge
/// costs its plain duration.
fn optimal_cost(
    current: SpacetimeVertex,
    target: &H2Signature,
    goal: (i32, i32),
    field: &OccupancyField,
    iota: f64,
    disc: &DiscretizationParams,
    map: &GridMap,
) -> f64 {
    let fold = field.origin_layer + field.m_max as u32 + 1;
    let key = |v: &SpacetimeVertex, s: &H2Signature| (v.x, v.y, v.t.min(fold), s.bits());
    let mut best: HashMap<(i32, i32, u32, Vec<bool>), f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let zero = H2Signature::zeros(map.component_count());
    best.insert(key(&current, &zero), 0.0);
    heap.push(Reverse((Cost(0.0), current.x, current.y, current.t, zero.bits())));
    while let Some(Reverse((Cost(g), x, y, t, bits))) = heap.pop() {
        let v = SpacetimeVertex::new(x, y, t);
        let sig = H2Signature::from_bits(&bits);
        if best.get(&key(&v, &sig)).is_some_and(|&b| b < g) {
            continue;
        }
        if (x, y) == goal && sig == *target {
            return g;
        }
        let mut next_t = t;
        if t > fold {
            next_t = fold;
        }
        let v = SpacetimeVertex::new(x, y, next_t);
        for (n, _) in successors(&v, disc, map, true) {
            let mut s = sig.clone();
            s.xor_assign(&segment_signature(&v.position(disc), &n.position(disc), map));
            let c = g + occupancy_edge_cost(&v, &n, field, iota, disc);
            let k = key(&n, &s);
            if best.get(&k).is_none_or(|&b| c < b) {
                best.insert(k, c);
                heap.push(Reverse((Cost(c), n.x, n.y, n.t, s.bits())));
            }
        }
    }
    f64::INFINITY
}

fn max_deviation(path: &SpacetimePath, reference: &SpacetimePath) -> f64 {
    let line = reference.positions();
    path.positions().iter().map(|p| distance_to_polyline(p, &line)).fold(0.0, f64::max)
}

#[test]
fn empty_field_keeps_reference_cost() {
    let map = pillar_room();
    let disc = DiscretizationParams::default();
    let r = reference(&map, &disc);
    let params = ReplanParams::default();
    for i in [0, r.len() / 3, r.len() / 2, r.len() - 2] {
        let current = r.vertices[i];
        let prefix = polyline_signature(&r.positions()[..=i], &map);
        let field = OccupancyField::empty(disc, current.t, params.m_max);
        let res = replan(current, &prefix, &r, &field, &params, &disc, &map).unwrap();
        assert!((res.cost - r.cost_to_go()[i]).abs() < 1e-6, "i = {i}: {} vs {}", res.cost, r.cost_to_go()[i]);
        assert!((res.cost - res.path.base_cost).abs() < 1e-9);
        assert_eq!(prefix.compose(&res.path.signature).unwrap(), r.signature);
    }
}

#[test]
fn blob_forces_in_class_detour() {
    let map = pillar_room();
    let disc = DiscretizationParams::default();
    let r = reference(&map, &disc);
    let field = blob_on(&r, &disc);
    let params = ReplanParams::default();
    let zero = H2Signature::zeros(map.component_count());
    let res = replan(r.vertices[0], &zero, &r, &field, &params, &disc, &map).unwrap();

    let follow = path_occupancy_cost(&r, &field, params.iota);
    let goal = (r.goal().x, r.goal().y);
    let best = optimal_cost(r.vertices[0], &r.signature, goal, &field, params.iota, &disc, &map);
    assert!(best < follow, "oracle finds no detour: {best} vs {follow}");
    assert!(res.cost < follow, "replan {} not below following {follow}", res.cost);
    assert!(res.cost >= best - 1e-9, "replan {} beats the optimum {best}", res.cost);
    assert_eq!(res.path.signature, r.signature);
    assert!(max_deviation(&res.path, &r) > disc.dr_fine);
    // The detour stays off the high-probability disk.
    assert!((path_occupancy_cost(&res.path, &field, params.iota) - res.cost).abs() < 1e-9);
}

#[test]
fn lower_alpha_deviates_at_least_as_far() {
    let map = pillar_room();
    let disc = DiscretizationParams::default();
    let r = reference(&map, &disc);
    let field = blob_on(&r, &disc);
    let zero = H2Signature::zeros(map.component_count());
    let run = |alpha: f64| {
        let params = ReplanParams { alpha, ..ReplanParams::default() };
        replan(r.vertices[0], &zero, &r, &field, &params, &disc, &map).unwrap()
    };
    let (tight, loose) = (run(1.0), run(0.5));
    assert!(max_deviation(&loose.path, &r) >= max_deviation(&tight.path, &r) - 1e-12);
    assert!(loose.expansions >= tight.expansions);
}

#[test]
fn blocked_corridors_preserve_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let params = ReplanParams { max_expansions: 2_000_000, ..ReplanParams::default() };
    let mut done = 0;
    while done < 25 {
        let Some(s) = blocked_corridor(&mut rng) else { continue };
        let res = replan(s.current, &s.prefix, &s.reference, &s.field, &params, &s.disc, &s.planning).unwrap();
        assert_eq!(s.prefix.compose(&res.path.signature).unwrap(), s.reference.signature);
        let mut whole = s.prefix_points.clone();
        whole.extend(res.path.positions().into_iter().skip(1));
        assert_eq!(polyline_signature(&whole, &s.raw), s.reference.signature);
        done += 1;
    }
}

#[test]
fn full_probability_edge_costs_1001_durations() {
    let disc = DiscretizationParams::default();
    let obs = Observation { position: Point::new(2.0, 2.0), velocity: Vec2::zeros(), radius: 0.5 };
    let field = predict_agent(&obs, &DiffusionKernel::IDENTITY, 4, &disc, 0);
    for (dx, dy) in [(4, 0), (3, 3), (0, 0)] {
        let a = SpacetimeVertex::new(32, 32, 1);
        let b = SpacetimeVertex::new(32 + dx, 32 + dy, 2);
        let d = edge_cost(&a, &b, &disc);
        assert!((occupancy_edge_cost(&a, &b, &field, 0.001, &disc) - 1001.0 * d).abs() < 1e-9 * d);
    }
}

#[test]
fn linear_ramp_matches_dense_quadrature() {
    // A point agent moving one move per layer reaches the waiting vertex at
    // the next layer, so P rises linearly from 0 to 1 along the wait edge.
    let disc = DiscretizationParams::default();
    let iota = 0.001;
    let obs = Observation { position: disc.position(32, 20), velocity: Vec2::new(disc.v_max, 0.0), radius: 0.0 };
    let field = predict_agent(&obs, &DiffusionKernel::IDENTITY, 2, &disc, 0);
    let a = SpacetimeVertex::new(36, 20, 0);
    let b = SpacetimeVertex::new(36, 20, 1);
    assert_eq!((field.value(36, 20, 0), field.value(36, 20, 1)), (0.0, 1.0));
    let got = occupancy_edge_cost(&a, &b, &field, iota, &disc);
    let n = 10_000;
    let dense = (0..n).map(|i| (1.0 + iota) / (1.0 + iota - (i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64 * disc.dt;
    assert!((got - dense).abs() / dense < 0.01, "{got} vs {dense}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fields_stay_in_unit_interval_and_merge_is_a_max(
        agents in prop::collection::vec((0.5f64..5.0, 0.5f64..5.0, -1.0f64..1.0, -1.0f64..1.0, 0.05f64..0.6), 0..4),
        center in 0.3f64..1.0,
    ) {
        let disc = DiscretizationParams::default();
        let side = (1.0 - center) / 4.0;
        let kernel = DiffusionKernel { center, edge: side * 0.8, corner: side * 0.2 };
        let obs: Vec<Observation> = agents
            .iter()
            .map(|&(x, y, vx, vy, r)| Observation { position: Point::new(x, y), velocity: Vec2::new(vx, vy), radius: r })
            .collect();
        let singles: Vec<OccupancyField> = obs.iter().map(|o| predict_agent(o, &kernel, 6, &disc, 3)).collect();
        let merged = predict_occupancy(&obs, &kernel, 6, &disc, 3);
        let refs: Vec<&OccupancyField> = singles.iter().collect();
        let rev: Vec<&OccupancyField> = singles.iter().rev().collect();
        let twice: Vec<&OccupancyField> = singles.iter().chain(singles.iter()).collect();
        for k in 0..=6 {
            for (x, y, v) in merged.support(k) {
                prop_assert!((0.0..=1.0).contains(&v));
                let expect = singles.iter().map(|f| f.value(x, y, k)).fold(0.0, f64::max);
                prop_assert_eq!(v, expect);
            }
        }
        prop_assert_eq!(&merge_fields(&rev, &disc, 3, 6), &merge_fields(&refs, &disc, 3, 6));
        prop_assert_eq!(&merge_fields(&twice, &disc, 3, 6), &merged);
    }

    #[test]
    fn edge_cost_never_below_duration(
        x in 10i32..80, y in 10i32..80, m in 0usize..9, t in 0u32..10,
        px in 0.5f64..5.0, py in 0.5f64..5.0, r in 0.05f64..1.0,
    ) {
        let disc = DiscretizationParams::default();
        let obs = Observation { position: Point::new(px, py), velocity: Vec2::new(0.3, -0.2), radius: r };
        let field = predict_agent(&obs, &DiffusionKernel::default(), 8, &disc, 2);
        let a = SpacetimeVertex::new(x, y, t);
        let (dx, dy) = if m == 8 { (0, 0) } else { topoflow::topo::MOVES[m] };
        let b = SpacetimeVertex::new(x + dx, y + dy, t + 1);
        prop_assert!(occupancy_edge_cost(&a, &b, &field, 0.001, &disc) >= edge_cost(&a, &b, &disc) - 1e-15);
    }
}

/// Dense-array version of the prediction: disk, repeated 9-cell diffusion,
/// then a whole-cell shift.
fn dense_prediction(center: (i32, i32), radius: f64, kernel: &DiffusionKernel, layers: usize, step: i32) -> Vec<Vec<f64>> {
    let disc = DiscretizationParams::default();
    const N: usize = 160;
    let mut grid = vec![0.0; N * N];
    let c = Point::new(center.0 as f64 * disc.dr_fine, center.1 as f64 * disc.dr_fine);
    for y in 0..N {
        for x in 0..N {
            if (disc.position(x as i32, y as i32) - c).norm() <= radius {
                grid[y * N + x] = 1.0;
            }
        }
    }
    let at = |g: &[f64], x: i64, y: i64| {
        if x < 0 || y < 0 || x >= N as i64 || y >= N as i64 {
            0.0
        } else {
            g[y as usize * N + x as usize]
        }
    };
    let mut out = Vec::new();
    for k in 0..=layers {
        if k > 0 {
            let prev = grid.clone();
            for y in 0..N as i64 {
                for x in 0..N as i64 {
                    let edge = at(&prev, x - 1, y) + at(&prev, x + 1, y) + at(&prev, x, y - 1) + at(&prev, x, y + 1);
                    let corner = at(&prev, x - 1, y - 1)
                        + at(&prev, x + 1, y - 1)
                        + at(&prev, x - 1, y + 1)
                        + at(&prev, x + 1, y + 1);
                    grid[y as usize * N + x as usize] =
                        kernel.center * at(&prev, x, y) + kernel.edge * edge + kernel.corner * corner;
                }
            }
        }
        let mut layer = vec![0.0; N * N];
        for y in 0..N as i64 {
            for x in 0..N as i64 {
                layer[y as usize * N + x as usize] = at(&grid, x - step as i64 * k as i64, y).clamp(0.0, 1.0);
            }
        }
        out.push(layer);
    }
    out
}

#[test]
fn moving_agent_matches_dense_oracle() {
    let disc = DiscretizationParams::default();
    let kernel = DiffusionKernel::default();
    let center = (40, 60);
    let obs = Observation { position: disc.position(center.0, center.1), velocity: Vec2::new(1.0, 0.0), radius: 0.3 };
    let field = predict_agent(&obs, &kernel, 8, &disc, 0);
    // v_max * dt / dr_fine = 4 lattice units per layer.
    let dense = dense_prediction(center, 0.3, &kernel, 8, 4);
    for (k, layer) in dense.iter().enumerate() {
        let (mut mass, mut mx) = (0.0, 0.0);
        for y in 0..160 {
            for x in 0..160 {
                let v = field.value(x, y, k);
                assert!((v - layer[y as usize * 160 + x as usize]).abs() < 1e-12, "layer {k} at ({x}, {y})");
                mass += v;
                mx += v * x as f64;
            }
        }
        let shift = (mx / mass - center.0 as f64) * disc.dr_fine;
        assert!((shift - k as f64 * disc.v_max * disc.dt).abs() < 1e-9, "layer {k}: {shift}");
        let peak = field.support(k).into_iter().map(|c| c.2).fold(0.0, f64::max);
        assert!(peak > 0.0 && field.value(center.0 + 4 * k as i32, center.1, k) == peak);
    }
}

#[test]
fn stationary_agent_without_diffusion_keeps_its_disk() {
    let disc = DiscretizationParams::default();
    let obs = Observation { position: Point::new(3.0, 3.0), velocity: Vec2::zeros(), radius: 0.4 };
    let field = predict_agent(&obs, &DiffusionKernel::IDENTITY, 12, &disc, 5);
    let disk: Vec<(i32, i32, f64)> = field.support(0);
    assert!(!disk.is_empty());
    for k in 0..=12 {
        assert_eq!(field.support(k), disk);
        assert!(disk.iter().all(|&(x, y, v)| v == 1.0 && (disc.position(x, y) - obs.position).norm() <= 0.4));
    }
    assert!(predict_occupancy(&[], &DiffusionKernel::default(), 12, &disc, 0).is_zero());
}
