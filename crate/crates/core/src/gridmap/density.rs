use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Cell, GridMap, MapError};

/// Normalized per-cell pass frequency of synthetic shortest paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficDensity {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub rho: Vec<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

impl TrafficDensity {
    /// Density that treats every free cell alike (rho = 1 on free cells).
    pub fn uniform(map: &GridMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            resolution: map.resolution(),
            rho: map.occupancy().iter().map(|&o| if o { 0.0 } else { 1.0 }).collect(),
            sample_count: 0,
            seed: 0,
        }
    }

    pub fn at(&self, cell: Cell) -> f64 {
        self.rho[cell.y * self.width + cell.x]
    }

    pub fn max(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// ASCII PGM (`P2`) with rho scaled to 0..=255.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|x| ((self.rho[y * self.width + x] * 255.0).round() as u32).min(255).to_string())
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Samples `num_paths` random free start/goal pairs, routes each along an
/// 8-connected shortest path, dilates it by a disk of `footprint_radius`
/// meters and counts how many dilated paths touch every cell.
pub fn estimate_traffic_density(
    map: &GridMap,
    num_paths: usize,
    footprint_radius: f64,
    seed: u64,
) -> Result<TrafficDensity, MapError> {
    let free: Vec<usize> = (0..map.width() * map.height())
        .filter(|&i| !map.occupancy()[i])
        .collect();
    if free.len() < 2 || num_paths == 0 {
        return Err(MapError::NotEnoughFreeCells);
    }
    let region = free_regions(map);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = 100 * num_paths;
    let mut pairs = Vec::with_capacity(num_paths);
    let mut attempts = 0;
    while pairs.len() < num_paths {
        if attempts == max_attempts {
            return Err(MapError::DisconnectedSample { found: pairs.len(), attempts });
        }
        attempts += 1;
        let s = free[rng.gen_range(0..free.len())];
        let g = free[rng.gen_range(0..free.len())];
        if s != g && region[s] == region[g] {
            pairs.push((s, g));
        }
    }

    let reach = (footprint_radius.max(0.0) / map.resolution()).ceil() as isize;
    let disk: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx * dx + dy * dy <= reach * reach)
        .collect();

    let n = map.width() * map.height();
    let counts = pairs
        .par_iter()
        .enumerate()
        .fold(
            || (vec![0u32; n], vec![u32::MAX; n], Dijkstra::new(n)),
            |(mut counts, mut stamp, mut dij), (k, &(s, g))| {
                let path = dij.shortest_path(map, map.occupancy(), s, g);
                for &i in &path {
                    let (x, y) = ((i % map.width()) as isize, (i / map.width()) as isize);
                    for &(dx, dy) in &disk {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= map.width() as isize || ny >= map.height() as isize {
                            continue;
                        }
                        let j = ny as usize * map.width() + nx as usize;
                        if !map.occupancy()[j] && stamp[j] != k as u32 {
                            stamp[j] = k as u32;
                            counts[j] += 1;
                        }
                    }
                }
                (counts, stamp, dij)
            },
        )
        .map(|(c, _, _)| c)
        .reduce(
            || vec![0u32; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let peak = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    Ok(TrafficDensity {
        width: map.width(),
        height: map.height(),
        resolution: map.resolution(),
        rho: counts.iter().map(|&c| c as f64 / peak).collect(),
        sample_count: num_paths,
        seed,
    })
}

/// 4-connected free-space regions. Diagonal moves that cut corners are
/// forbidden, so these are also the 8-connected reachability classes.
fn free_regions(map: &GridMap) -> Vec<u32> {
    let inverted: Vec<bool> = map.occupancy().iter().map(|o| !o).collect();
    super::label_components(map.width(), map.height(), &inverted).0
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const MOVES: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Reusable 8-connected grid Dijkstra without corner cutting.
pub(crate) struct Dijkstra {
    dist: Vec<f64>,
    touched: Vec<usize>,
    heap: BinaryHeap<Entry>,
}

impl Dijkstra {
    pub(crate) fn new(n: usize) -> Self {
        Self { dist: vec![f64::INFINITY; n], touched: Vec::new(), heap: BinaryHeap::new() }
    }

    fn neighbors<'a>(map: &GridMap, occ: &'a [bool], i: usize) -> impl Iterator<Item = (usize, f64)> + 'a {
        let w = map.width() as isize;
        let h = map.height() as isize;
        let (x, y) = (i as isize % w, i as isize / w);
        MOVES.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                return None;
            }
            let j = (ny * w + nx) as usize;
            if occ[j] {
                return None;
            }
            if dx != 0 && dy != 0 && (occ[(y * w + nx) as usize] || occ[(ny * w + x) as usize]) {
                return None;
            }
            Some((j, if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 }))
        })
    }

    /// Cell indices from `s` to `g` inclusive. Among equal-cost predecessors
    /// the one nearest the straight start–goal line is taken, which keeps
    /// the result symmetric under the map's own symmetries.
    /// `mask` marks impassable cells (usually the map occupancy).
    pub(crate) fn shortest_path(&mut self, map: &GridMap, mask: &[bool], s: usize, g: usize) -> Vec<usize> {
        for &i in &self.touched {
            self.dist[i] = f64::INFINITY;
        }
        self.touched.clear();
        self.heap.clear();
        self.dist[s] = 0.0;
        self.touched.push(s);
        self.heap.push(Entry { cost: 0.0, cell: s });
        while let Some(Entry { cost, cell }) = self.heap.pop() {
            if cost > self.dist[cell] {
                continue;
            }
            if cell == g {
                break;
            }
            for (j, c) in Self::neighbors(map, mask, cell) {
                let nd = cost + c;
                if nd < self.dist[j] {
                    if self.dist[j].is_infinite() {
                        self.touched.push(j);
                    }
                    self.dist[j] = nd;
                    self.heap.push(Entry { cost: nd, cell: j });
                }
            }
        }
        if self.dist[g].is_infinite() {
            return Vec::new();
        }
        let w = map.width();
        let pos = |i: usize| ((i % w) as f64, (i / w) as f64);
        let (sx, sy) = pos(s);
        let (gx, gy) = pos(g);
        let (dx, dy) = (gx - sx, gy - sy);
        let len2 = dx * dx + dy * dy;
        // (squared distance to the start-goal segment, side of the line)
        let rank = |i: usize| {
            let (px, py) = pos(i);
            let t = (((px - sx) * dx + (py - sy) * dy) / len2).clamp(0.0, 1.0);
            let (qx, qy) = (sx + t * dx - px, sy + t * dy - py);
            (qx * qx + qy * qy, dx * (py - sy) - dy * (px - sx))
        };
        let mut path = vec![g];
        let mut cur = g;
        while cur != s {
            let mut best: Option<((f64, f64), usize)> = None;
            for (j, c) in Self::neighbors(map, mask, cur) {
                if (self.dist[j] + c - self.dist[cur]).abs() > 1e-9 {
                    continue;
                }
                let r = rank(j);
                // Ties on distance go to the left side, which commutes
                // with rotations of the grid.
                let better = best.is_none_or(|(br, _)| {
                    r.0 < br.0 - 1e-9 || (r.0 <= br.0 + 1e-9 && r.1 > br.1)
                });
                if better {
                    best = Some((r, j));
                }
            }
            cur = best.expect("predecessor on a settled path").1;
            path.push(cur);
        }
        path.reverse();
        path
    }

    #[cfg(test)]
    pub(crate) fn distance(&self, i: usize) -> f64 {
        self.dist[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(n: usize) -> GridMap {
        let mut text = String::from("resolution 1\n");
        for _ in 0..n {
            text.push_str(&".".repeat(n));
            text.push('\n');
        }
        GridMap::from_text(&text).unwrap()
    }

    #[test]
    fn short_corridor_is_saturated() {
        let map = GridMap::from_text("resolution 1\n#####\n#...#\n#####\n").unwrap();
        let d = estimate_traffic_density(&map, 200, 1.0, 3).unwrap();
        for x in 1..4 {
            assert_eq!(d.at(Cell::new(x, 1)), 1.0);
        }
        assert_eq!(d.at(Cell::new(0, 0)), 0.0);
    }

    #[test]
    fn single_straight_path_marks_only_its_cells() {
        let map = GridMap::from_text("resolution 1\n#####\n#...#\n#####\n").unwrap();
        // With one sample and zero radius only the sampled path is marked.
        let d = estimate_traffic_density(&map, 1, 0.0, 11).unwrap();
        assert_eq!(d.max(), 1.0);
        assert!(d.rho.iter().all(|&r| r == 0.0 || r == 1.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let map = open(8);
        let a = estimate_traffic_density(&map, 300, 0.5, 7).unwrap();
        let b = estimate_traffic_density(&map, 300, 0.5, 7).unwrap();
        let c = estimate_traffic_density(&map, 300, 0.5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.rho, c.rho);
        assert_eq!(a.to_pgm(), b.to_pgm());
    }

    #[test]
    fn open_square_is_rotation_symmetric() {
        // 2 m square at 0.25 m cells with the default 0.3 m footprint.
        let n = 8;
        let map = GridMap::from_text(&format!("resolution 0.25\n{}", format!("{}\n", ".".repeat(n)).repeat(n))).unwrap();
        for seed in [1, 42, 1234] {
            let d = estimate_traffic_density(&map, 5000, 0.3, seed).unwrap();
            let mut worst: f64 = 0.0;
            for y in 0..n {
                for x in 0..n {
                    // Rotate by 90 degrees: (x, y) -> (n-1-y, x).
                    let a = d.at(Cell::new(x, y));
                    let b = d.at(Cell::new(n - 1 - y, x));
                    worst = worst.max((a - b).abs());
                }
            }
            assert!(worst < 0.05, "seed {seed}: max asymmetry {worst}");
        }
    }

    #[test]
    fn disconnected_free_space_is_reported() {
        let map = GridMap::from_text("resolution 1\n.#.\n").unwrap();
        let err = estimate_traffic_density(&map, 3, 0.0, 1).unwrap_err();
        assert!(matches!(err, MapError::DisconnectedSample { .. }));
    }

    #[test]
    fn dijkstra_matches_octile_distance_on_open_grid() {
        let map = open(9);
        let mut dij = Dijkstra::new(81);
        let path = dij.shortest_path(&map, map.occupancy(), 0, 8 * 9 + 5);
        let expected = 5.0 * std::f64::consts::SQRT_2 + 3.0;
        assert!((dij.distance(8 * 9 + 5) - expected).abs() < 1e-9);
        assert_eq!(path.len(), 9);
    }

    #[test]
    fn pgm_header() {
        let map = open(3);
        let pgm = TrafficDensity::uniform(&map).to_pgm();
        assert!(pgm.starts_with("P2\n3 3\n255\n255 255 255\n"));
    }
}
