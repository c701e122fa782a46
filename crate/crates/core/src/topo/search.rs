use std::cell::Cell;
use std::collections::HashSet;

use super::astar::{self, Problem, Visit};
use super::lattice::{snap_to_lattice, successors};
use super::signature::accumulate_segment;
use super::{DiscretizationParams, H2Signature, SpacetimePath, SpacetimeVertex, TopoError};
use crate::gridmap::GridMap;
use crate::Point;

/// Limits for the multi-class search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    /// Layer cap as a multiple of the straight-line travel time.
    pub t_cap_factor: f64,
    /// Lower bound on the layer cap.
    pub min_layers: u32,
    pub max_expansions: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { t_cap_factor: 8.0, min_layers: 32, max_expansions: 3_000_000 }
    }
}

/// Result of a multi-class query.
#[derive(Debug, Clone)]
pub struct TopologicalPaths {
    /// Distinct-signature paths in nondecreasing cost order.
    pub paths: Vec<SpacetimePath>,
    /// Number of classes asked for.
    pub requested: usize,
    /// Set when the time cap cut off part of the search.
    pub cap_hit: bool,
}

impl TopologicalPaths {
    /// Fewer classes than requested were found.
    pub fn is_partial(&self) -> bool {
        self.paths.len() < self.requested
    }
}

struct ClassSearch<'a> {
    map: &'a GridMap,
    disc: &'a DiscretizationParams,
    goal: (i32, i32),
    goal_pos: Point,
    t_cap: u32,
    cap_hit: Cell<bool>,
}

impl Problem for ClassSearch<'_> {
    type Key = (i32, i32, H2Signature);

    fn key(&self, v: &SpacetimeVertex, sig: &H2Signature) -> Self::Key {
        (v.x, v.y, sig.clone())
    }

    fn expand(&self, v: &SpacetimeVertex, sig: &H2Signature, out: &mut Vec<(SpacetimeVertex, H2Signature, f64)>) {
        if v.t >= self.t_cap {
            self.cap_hit.set(true);
            return;
        }
        let p0 = v.position(self.disc);
        for (next, cost) in successors(v, self.disc, self.map, false) {
            let mut s = sig.clone();
            accumulate_segment(&mut s, &p0, &next.position(self.disc), self.map);
            out.push((next, s, cost));
        }
    }

    fn heuristic(&self, v: &SpacetimeVertex, _sig: &H2Signature) -> f64 {
        (v.position(self.disc) - self.goal_pos).norm() / self.disc.v_max
    }

    fn is_goal(&self, v: &SpacetimeVertex, _sig: &H2Signature) -> bool {
        (v.x, v.y) == self.goal
    }
}

/// Snaps `start` to the nearest free lattice point and `goal` to the nearest
/// free lattice point reachable from it.
type LatticePoint = (i32, i32);

pub fn snap_endpoints(
    map: &GridMap,
    start: &Point,
    goal: &Point,
    disc: &DiscretizationParams,
) -> Result<(LatticePoint, LatticePoint), TopoError> {
    let s = snap_to_lattice(start, disc, map, None).ok_or(TopoError::InvalidEndpoint("start"))?;
    let g = snap_to_lattice(goal, disc, map, Some((s.0 + s.1).rem_euclid(2)))
        .ok_or(TopoError::InvalidEndpoint("goal"))?;
    Ok((s, g))
}

/// Up to `m` cheapest paths from `start` to `goal` with pairwise distinct
/// signatures.
pub fn find_topological_paths(
    map: &GridMap,
    start: &Point,
    goal: &Point,
    m: usize,
    disc: &DiscretizationParams,
) -> Result<TopologicalPaths, TopoError> {
    find_topological_paths_with(map, start, goal, m, disc, &SearchLimits::default())
}

pub fn find_topological_paths_with(
    map: &GridMap,
    start: &Point,
    goal: &Point,
    m: usize,
    disc: &DiscretizationParams,
    limits: &SearchLimits,
) -> Result<TopologicalPaths, TopoError> {
    if m == 0 {
        return Err(TopoError::InvalidParams("m must be at least 1".into()));
    }
    let (s, g) = snap_endpoints(map, start, goal, disc)?;
    let straight = (disc.position(s.0, s.1) - disc.position(g.0, g.1)).norm() / disc.v_max;
    let t_cap = ((limits.t_cap_factor * straight / disc.dt).ceil() as u32).max(limits.min_layers);
    let problem = ClassSearch {
        map,
        disc,
        goal: g,
        goal_pos: disc.position(g.0, g.1),
        t_cap,
        cap_hit: Cell::new(false),
    };
    let mut found: Vec<SpacetimePath> = Vec::new();
    let mut seen = HashSet::new();
    let start_v = SpacetimeVertex::new(s.0, s.1, 0);
    astar::run(&problem, start_v, H2Signature::zeros(map.component_count()), limits.max_expansions, false, |search, idx| {
        let node = &search.nodes[idx as usize];
        if seen.insert(node.sig.clone()) {
            let path = SpacetimePath::new(search.trace(idx), *disc, map);
            debug_assert_eq!(path.signature, node.sig);
            found.push(path);
        }
        if found.len() == m {
            Visit::Stop
        } else {
            Visit::Continue
        }
    });
    if found.is_empty() {
        return Err(TopoError::Unreachable);
    }
    Ok(TopologicalPaths { paths: found, requested: m, cap_hit: problem.cap_hit.get() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_map_single_class_near_straight_line() {
        let map = GridMap::from_text(&format!("resolution 0.5\n{}", "..........\n".repeat(8))).unwrap();
        let disc = DiscretizationParams::default();
        let res = find_topological_paths(&map, &Point::new(0.6, 0.6), &Point::new(4.3, 3.1), 1, &disc).unwrap();
        assert_eq!(res.paths.len(), 1);
        let p = &res.paths[0];
        let euclid = (p.goal().position(&disc) - p.start().position(&disc)).norm();
        assert!(p.base_cost >= euclid / disc.v_max - 1e-12);
        assert!(p.base_cost <= euclid / disc.v_max * 1.0607 + disc.dt * 1.0607);
        for w in p.vertices.windows(2) {
            assert_eq!(w[1].t, w[0].t + 1);
        }
    }

    #[test]
    fn single_obstacle_has_two_classes() {
        let map = GridMap::from_text(
            "resolution 0.5\n..........\n..........\n..........\n....##....\n....##....\n..........\n..........\n..........\n",
        )
        .unwrap();
        let disc = DiscretizationParams::default();
        let res = find_topological_paths(&map, &Point::new(0.5, 2.0), &Point::new(4.5, 2.0), 2, &disc).unwrap();
        assert_eq!(res.paths.len(), 2);
        let sigs: HashSet<_> = res.paths.iter().map(|p| p.signature.to_string()).collect();
        assert_eq!(sigs, HashSet::from(["0".to_string(), "1".to_string()]));
        assert!(res.paths[0].base_cost <= res.paths[1].base_cost);
    }

    #[test]
    fn obstacle_free_map_reports_fewer_classes() {
        let map = GridMap::from_text(&format!("resolution 0.5\n{}", "......\n".repeat(4))).unwrap();
        let disc = DiscretizationParams::default();
        let res = find_topological_paths(&map, &Point::new(0.5, 0.5), &Point::new(2.5, 1.5), 3, &disc).unwrap();
        assert_eq!(res.paths.len(), 1);
        assert!(res.is_partial());
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let map = GridMap::from_text("resolution 0.5\n...#...\n...#...\n...#...\n").unwrap();
        let disc = DiscretizationParams::default();
        let err = find_topological_paths(&map, &Point::new(0.5, 0.5), &Point::new(3.0, 0.5), 1, &disc).unwrap_err();
        assert!(matches!(err, TopoError::Unreachable));
    }
}
