use super::signature::accumulate_segment;
use super::{DiscretizationParams, H2Signature, SpacetimeVertex};
use crate::gridmap::GridMap;
use crate::Point;

/// Time-parametrized lattice path with its homology signature and travel
/// cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimePath {
    pub vertices: Vec<SpacetimeVertex>,
    pub signature: H2Signature,
    /// Sum of edge travel times, seconds.
    pub base_cost: f64,
    pub disc: DiscretizationParams,
}

/// Travel time of one lattice edge: length over `v_max`, or one layer for a
/// wait.
pub fn edge_cost(a: &SpacetimeVertex, b: &SpacetimeVertex, disc: &DiscretizationParams) -> f64 {
    if a.x == b.x && a.y == b.y {
        disc.dt
    } else {
        (a.position(disc) - b.position(disc)).norm() / disc.v_max
    }
}

impl SpacetimePath {
    /// Builds a path, computing its signature and base cost.
    pub fn new(vertices: Vec<SpacetimeVertex>, disc: DiscretizationParams, map: &GridMap) -> Self {
        assert!(!vertices.is_empty(), "empty path");
        let mut signature = H2Signature::zeros(map.component_count());
        let mut base_cost = 0.0;
        for w in vertices.windows(2) {
            accumulate_segment(&mut signature, &w[0].position(&disc), &w[1].position(&disc), map);
            base_cost += edge_cost(&w[0], &w[1], &disc);
        }
        Self { vertices, signature, base_cost, disc }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start(&self) -> &SpacetimeVertex {
        &self.vertices[0]
    }

    pub fn goal(&self) -> &SpacetimeVertex {
        self.vertices.last().unwrap()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.vertices.iter().map(|v| v.position(&self.disc)).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.disc.time(self.start().t)
    }

    pub fn end_time(&self) -> f64 {
        self.disc.time(self.goal().t)
    }

    pub fn edge_costs(&self) -> Vec<f64> {
        self.vertices.windows(2).map(|w| edge_cost(&w[0], &w[1], &self.disc)).collect()
    }

    /// Remaining travel cost from each vertex to the end of the path.
    pub fn cost_to_go(&self) -> Vec<f64> {
        let edges = self.edge_costs();
        let mut out = vec![0.0; self.vertices.len()];
        for i in (0..edges.len()).rev() {
            out[i] = out[i + 1] + edges[i];
        }
        out
    }

    /// Position at absolute time `time`, linearly interpolated between
    /// vertices and clamped to the endpoints.
    pub fn position_at(&self, time: f64) -> Point {
        let s = (time - self.start_time()) / self.disc.dt;
        if s <= 0.0 {
            return self.start().position(&self.disc);
        }
        let i = s.floor() as usize;
        if i + 1 >= self.vertices.len() {
            return self.goal().position(&self.disc);
        }
        let f = s - i as f64;
        let a = self.vertices[i].position(&self.disc);
        let b = self.vertices[i + 1].position(&self.disc);
        a + (b - a) * f
    }

    /// Spatial length in meters.
    pub fn length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| (w[1].position(&self.disc) - w[0].position(&self.disc)).norm())
            .sum()
    }
}
