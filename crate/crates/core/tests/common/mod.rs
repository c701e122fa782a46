#![allow(dead_code)]

use rand::Rng;
use topoflow::assign::ClassCosts;
use topoflow::gridmap::{Cell, GridMap};
use topoflow::replan::{predict_agent, DiffusionKernel, Observation, OccupancyField};
use topoflow::topo::{
    find_topological_paths, polyline_signature, segment_free, successors, vertex_free, DiscretizationParams, H2Signature,
    SpacetimePath, SpacetimeVertex, MOVES,
};
use topoflow::{Point, Vec2};

pub fn fixture(name: &str) -> GridMap {
    let path = format!("{}/../../maps/{name}.map", env!("CARGO_MANIFEST_DIR"));
    GridMap::from_text(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))).unwrap()
}

pub fn open_map(w: usize, h: usize, res: f64) -> GridMap {
    GridMap::from_text(&format!("resolution {res}\n{}", format!("{}\n", ".".repeat(w)).repeat(h))).unwrap()
}

/// Map text with `#` rectangles given in cells as (x0, y0, x1, y1), end exclusive.
pub fn map_with_blocks(w: usize, h: usize, res: f64, blocks: &[(usize, usize, usize, usize)]) -> GridMap {
    let mut grid = vec![vec!['.'; w]; h];
    for &(x0, y0, x1, y1) in blocks {
        for row in grid.iter_mut().take(y1).skip(y0) {
            for c in row.iter_mut().take(x1).skip(x0) {
                *c = '#';
            }
        }
    }
    let body: String = grid.iter().map(|r| r.iter().collect::<String>() + "\n").collect();
    GridMap::from_text(&format!("resolution {res}\n{body}")).unwrap()
}

/// Random map with a few rectangular obstacles kept off the border.
pub fn random_map<R: Rng>(rng: &mut R) -> GridMap {
    loop {
        let w = rng.gen_range(12..=20);
        let h = rng.gen_range(10..=16);
        let n = rng.gen_range(1..=4);
        let mut occ = vec![false; w * h];
        for _ in 0..n {
            let bw = rng.gen_range(1..=4);
            let bh = rng.gen_range(1..=4);
            let x0 = rng.gen_range(2..w - bw - 1);
            let y0 = rng.gen_range(2..h - bh - 1);
            for y in y0..y0 + bh {
                for x in x0..x0 + bw {
                    occ[y * w + x] = true;
                }
            }
        }
        if let Ok(map) = GridMap::from_occupancy(w, h, 0.25, occ) {
            return map;
        }
    }
}

/// Uniform random point on a cell that is free under the map's clearance.
pub fn random_free_point<R: Rng>(map: &GridMap, rng: &mut R) -> Point {
    let (w, h) = map.extent();
    loop {
        let p = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        if map.is_free_point(&p) {
            return p;
        }
    }
}

/// A reference path, a displaced current vertex on it, the signature
/// traversed so far and a stationary blob sitting on the reference ahead.
pub struct BlockedCorridor {
    pub raw: GridMap,
    pub planning: GridMap,
    pub disc: DiscretizationParams,
    pub reference: SpacetimePath,
    pub current: SpacetimeVertex,
    /// Points from the reference start to `current`.
    pub prefix_points: Vec<Point>,
    pub prefix: H2Signature,
    pub field: OccupancyField,
}

/// Random blocked-corridor scenario, or `None` when the drawn geometry does
/// not admit one (no path, reference too short, displaced vertex blocked).
pub fn blocked_corridor<R: Rng>(rng: &mut R) -> Option<BlockedCorridor> {
    let raw = random_map(rng);
    let planning = raw.with_clearance(0.2);
    let disc = DiscretizationParams::default();
    let start = random_free_point(&planning, rng);
    let goal = random_free_point(&planning, rng);
    if (start - goal).norm() < 1.5 {
        return None;
    }
    let found = find_topological_paths(&planning, &start, &goal, 3, &disc).ok()?;
    if found.paths.is_empty() {
        return None;
    }
    let reference = found.paths[rng.gen_range(0..found.paths.len())].clone();
    if reference.len() < 8 {
        return None;
    }
    let i = rng.gen_range(1..reference.len() - 4);
    let on_ref = reference.vertices[i];
    let (dx, dy) = MOVES[rng.gen_range(0..MOVES.len())];
    let current = SpacetimeVertex::new(on_ref.x + dx, on_ref.y + dy, on_ref.t + 1);
    let (p_on, p_cur) = (on_ref.position(&disc), current.position(&disc));
    if !vertex_free(current.x, current.y, &disc, &planning) || !segment_free(&p_on, &p_cur, &disc, &planning) {
        return None;
    }
    let mut prefix_points: Vec<Point> = reference.positions()[..=i].to_vec();
    prefix_points.push(p_cur);
    let prefix = polyline_signature(&prefix_points, &planning);
    let ahead = reference.vertices[(i + 4).min(reference.len() - 2)].position(&disc);
    let blob = Observation { position: ahead, velocity: Vec2::zeros(), radius: rng.gen_range(0.2..0.5) };
    let field = predict_agent(&blob, &DiffusionKernel::default(), 12, &disc, current.t);
    Some(BlockedCorridor { raw, planning, disc, reference, current, prefix_points, prefix, field })
}

/// Smallest distance from `p` to the polyline `line`.
pub fn distance_to_polyline(p: &Point, line: &[Point]) -> f64 {
    if line.len() == 1 {
        return (p - line[0]).norm();
    }
    line.windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let l2 = d.norm_squared();
            let u = if l2 == 0.0 { 0.0 } else { ((p - w[0]).dot(&d) / l2).clamp(0.0, 1.0) };
            (p - (w[0] + d * u)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Whether the straight segment stays on unoccupied cells, sampled every
/// centimeter.
pub fn segment_open(map: &GridMap, a: &Point, b: &Point) -> bool {
    let n = ((b - a).norm() / 0.01).ceil().max(1.0) as usize;
    (0..=n).all(|k| map.is_open_point(&(a + (b - a) * (k as f64 / n as f64))))
}

/// Random closed polyline through 3 to 6 open points with open segments.
pub fn random_loop<R: Rng>(map: &GridMap, rng: &mut R) -> Vec<Point> {
    let (w, h) = map.extent();
    'retry: loop {
        let n = rng.gen_range(3..=6);
        let mut pts: Vec<Point> = Vec::with_capacity(n + 1);
        while pts.len() < n {
            let p = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
            if !map.is_open_point(&p) {
                continue;
            }
            if let Some(last) = pts.last() {
                if !segment_open(map, last, &p) {
                    continue 'retry;
                }
            }
            pts.push(p);
        }
        if !segment_open(map, &pts[n - 1], &pts[0]) {
            continue;
        }
        pts.push(pts[0]);
        return pts;
    }
}

/// Parity of the winding number of a closed polyline around each obstacle
/// component, by angle summation about one of the component's cell centers.
/// Bit order follows the map's rays.
pub fn winding_parity(map: &GridMap, closed: &[Point]) -> Vec<bool> {
    let (w, _) = (map.width(), map.height());
    map.rays()
        .iter()
        .map(|ray| {
            let idx = map.labels().iter().position(|&l| l == ray.component).unwrap();
            let z = map.cell_center(Cell::new(idx % w, idx / w));
            let total: f64 = closed
                .windows(2)
                .map(|s| {
                    let (u, v) = (s[0] - z, s[1] - z);
                    (u.x * v.y - u.y * v.x).atan2(u.dot(&v))
                })
                .sum();
            let turns = (total / std::f64::consts::TAU).round() as i64;
            turns.rem_euclid(2) == 1
        })
        .collect()
}

/// Travel time of the cheapest lattice path between two lattice points,
/// by plain Dijkstra over the 8 constant-speed moves.
pub fn lattice_dijkstra(map: &GridMap, s: (i32, i32), g: (i32, i32), disc: &DiscretizationParams) -> Option<f64> {
    use std::cmp::Reverse;
    use std::collections::{BinaryHeap, HashMap};
    #[derive(PartialEq)]
    struct C(f64);
    impl Eq for C {}
    impl PartialOrd for C {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for C {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }
    let mut dist: HashMap<(i32, i32), f64> = HashMap::from([(s, 0.0)]);
    let mut heap = BinaryHeap::from([Reverse((C(0.0), s))]);
    while let Some(Reverse((C(d), u))) = heap.pop() {
        if u == g {
            return Some(d);
        }
        if dist[&u] < d {
            continue;
        }
        for (v, c) in successors(&SpacetimeVertex::new(u.0, u.1, 0), disc, map, false) {
            let nd = d + c;
            if dist.get(&(v.x, v.y)).is_none_or(|&old| nd < old) {
                dist.insert((v.x, v.y), nd);
                heap.push(Reverse((C(nd), (v.x, v.y))));
            }
        }
    }
    None
}

/// Class costs built from random weighted edge sets. Overlap between two
/// classes is the weight of their shared edges, a Gram matrix, as produced by
/// real paths.
pub fn edge_set_instance<R: Rng>(rng: &mut R, m: usize) -> ClassCosts {
    let edges = rng.gen_range(m + 1..3 * m + 4);
    let w: Vec<f64> = (0..edges).map(|_| rng.gen_range(0.2..3.0)).collect();
    let rho: Vec<f64> = (0..edges).map(|_| rng.gen_range(0.0..1.0)).collect();
    let member: Vec<Vec<bool>> = (0..m).map(|_| (0..edges).map(|_| rng.gen_bool(0.5)).collect()).collect();
    let total = |f: &dyn Fn(usize) -> bool, v: &[f64]| (0..edges).filter(|&e| f(e)).map(|e| v[e]).sum::<f64>();
    let base: Vec<f64> = (0..m).map(|j| total(&|e| member[j][e], &w) + 1.0).collect();
    let traffic: Vec<f64> = (0..m).map(|j| total(&|e| member[j][e], &rho)).collect();
    let overlap = (0..m)
        .map(|j| (0..m).map(|k| total(&|e| member[j][e] && member[k][e], &w)).collect())
        .collect();
    ClassCosts { base, traffic, overlap }
}

pub fn random_simplex<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..m).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Largest per-class ensemble term `Σ_k overlap[j][k]·p_k`.
pub fn k_max(p: &[f64], costs: &ClassCosts) -> f64 {
    costs.overlap.iter().map(|row| row.iter().zip(p).map(|(o, x)| o * x).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
}
