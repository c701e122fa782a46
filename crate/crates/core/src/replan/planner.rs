use std::cell::RefCell;

use rustc_hash::FxHashMap;

use super::occupancy::{occupancy_edge_cost, OccupancyField};
use super::{ReplanError, ReplanParams};
use crate::gridmap::GridMap;
use crate::topo::astar::{self, Problem, Visit};
use crate::topo::{
    accumulate_segment, successors, DiscretizationParams, H2Signature, SpacetimePath, SpacetimeVertex,
};
use crate::Point;

#[derive(Debug, Clone)]
pub struct ReplanResult {
    pub path: SpacetimePath,
    /// Occupancy-weighted cost of the returned path.
    pub cost: f64,
    pub expansions: usize,
}

struct Guided<'a> {
    map: &'a GridMap,
    disc: &'a DiscretizationParams,
    field: &'a OccupancyField,
    params: &'a ReplanParams,
    ref_points: Vec<Point>,
    ref_cost_to_go: Vec<f64>,
    goal: (i32, i32),
    target: H2Signature,
    /// Layers past this index all behave alike (the field is zero there).
    t_flat: u32,
    t_cap: u32,
    h_cache: RefCell<FxHashMap<(i32, i32), f64>>,
}

impl Problem for Guided<'_> {
    type Key = (i32, i32, u32, H2Signature);

    fn key(&self, v: &SpacetimeVertex, sig: &H2Signature) -> Self::Key {
        (v.x, v.y, v.t.min(self.t_flat), sig.clone())
    }

    fn expand(&self, v: &SpacetimeVertex, sig: &H2Signature, out: &mut Vec<(SpacetimeVertex, H2Signature, f64)>) {
        if v.t >= self.t_cap {
            return;
        }
        let p0 = v.position(self.disc);
        for (next, _) in successors(v, self.disc, self.map, true) {
            let cost = occupancy_edge_cost(v, &next, self.field, self.params.iota, self.disc);
            let mut s = sig.clone();
            if (next.x, next.y) != (v.x, v.y) {
                accumulate_segment(&mut s, &p0, &next.position(self.disc), self.map);
            }
            out.push((next, s, cost));
        }
    }

    fn heuristic(&self, v: &SpacetimeVertex, _sig: &H2Signature) -> f64 {
        *self.h_cache.borrow_mut().entry((v.x, v.y)).or_insert_with(|| {
            let p = v.position(self.disc);
            let (i, d2) = self
                .ref_points
                .iter()
                .enumerate()
                .map(|(i, q)| (i, (q - p).norm_squared()))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            self.params.alpha * (d2.sqrt() / self.disc.v_max + self.ref_cost_to_go[i])
        })
    }

    fn is_goal(&self, v: &SpacetimeVertex, sig: &H2Signature) -> bool {
        (v.x, v.y) == self.goal && *sig == self.target
    }
}

/// Plans from `current` to the reference goal through the occupancy field,
/// keeping the homology class of `prefix + suffix` equal to the reference's.
///
/// `prefix_sig` is the signature already traversed from the reference start
/// to `current`.
pub fn replan(
    current: SpacetimeVertex,
    prefix_sig: &H2Signature,
    reference: &SpacetimePath,
    field: &OccupancyField,
    params: &ReplanParams,
    disc: &DiscretizationParams,
    map: &GridMap,
) -> Result<ReplanResult, ReplanError> {
    if reference.is_empty() {
        return Err(ReplanError::EmptyReference);
    }
    let target = prefix_sig
        .compose(&reference.signature)
        .map_err(|_| ReplanError::SignatureLength)?;
    let goal = *reference.goal();
    let remaining_layers = reference.len() as u32;
    let t_flat = field.origin_layer + field.m_max as u32 + 1;
    let t_cap = current.t.max(t_flat) + 3 * remaining_layers + 2 * params.m_max as u32 + 32;
    let problem = Guided {
        map,
        disc,
        field,
        params,
        ref_points: reference.positions(),
        ref_cost_to_go: reference.cost_to_go(),
        goal: (goal.x, goal.y),
        target,
        t_flat,
        t_cap,
        h_cache: RefCell::new(FxHashMap::default()),
    };
    let mut found = None;
    let (search, outcome) = astar::run(
        &problem,
        current,
        H2Signature::zeros(map.component_count()),
        params.max_expansions,
        true,
        |search, idx| {
            found = Some((search.trace(idx), search.nodes[idx as usize].g));
            Visit::Stop
        },
    );
    drop(search);
    let Some((vertices, cost)) = found else {
        return Err(ReplanError::ReplanFailed { expansions: outcome.expansions });
    };
    Ok(ReplanResult { path: SpacetimePath::new(vertices, *disc, map), cost, expansions: outcome.expansions })
}

/// Occupancy-weighted cost of an existing path.
pub fn path_occupancy_cost(path: &SpacetimePath, field: &OccupancyField, iota: f64) -> f64 {
    path.vertices
        .windows(2)
        .map(|w| occupancy_edge_cost(&w[0], &w[1], field, iota, &path.disc))
        .sum()
}

