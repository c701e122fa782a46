//! Occupancy grid maps.
//!
//! A map is a rectangular grid of square cells. Cell `(x, y)` covers
//! `[x·res, (x+1)·res) × [y·res, (y+1)·res)` in meters; the first grid row of
//! a map file is `y = 0`. Occupied cells are grouped into 4-connected obstacle
//! components, each of which gets a representative point and a ray used to
//! compute homology signatures.

mod density;
mod rays;

use std::sync::OnceLock;

use crate::topo::LatticeMask;

pub use density::{estimate_traffic_density, TrafficDensity};
pub(crate) use density::Dijkstra;
pub use rays::{build_rays, Ray, RayDirection};

use std::collections::VecDeque;

use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("map header must be `resolution <meters per cell>`, got {0:?}")]
    BadHeader(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedGrid { row: usize, expected: usize, found: usize },
    #[error("unexpected character {ch:?} at row {row}, column {col}")]
    InvalidCell { ch: char, row: usize, col: usize },
    #[error("map has no free cells")]
    EmptyMap,
    #[error("could not construct non-intersecting rays for obstacle component {component}")]
    RayConstructionFailed { component: usize },
    #[error("density estimation needs at least two free cells and one sample path")]
    NotEnoughFreeCells,
    #[error("only {found} connected start/goal pairs after {attempts} attempts")]
    DisconnectedSample { found: usize, attempts: usize },
}

/// Integer grid cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone)]
pub struct GridMap {
    width: usize,
    height: usize,
    resolution: f64,
    occupancy: Vec<bool>,
    /// Obstacle component per cell, 0 for free cells.
    labels: Vec<u32>,
    representatives: Vec<Cell>,
    rays: Vec<Ray>,
    /// Occupancy dilated by the planning clearance. Equals `occupancy` when
    /// the clearance is zero.
    blocked: Vec<bool>,
    clearance: f64,
    /// Lattice edge table, built on first use by the planners.
    lattice: OnceLock<LatticeMask>,
}

impl GridMap {
    /// Parses the ASCII map format: a `resolution <float>` header line, then
    /// one line per grid row with `#` for occupied and `.` for free cells.
    pub fn from_text(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MapError::BadHeader(String::new()))?;
        let resolution = parse_header(header)?;

        let mut width = None;
        let mut occupancy = Vec::new();
        let mut height = 0;
        for (row, line) in lines.enumerate() {
            let line = line.trim();
            let len = line.chars().count();
            let expected = *width.get_or_insert(len);
            if len != expected {
                return Err(MapError::RaggedGrid { row, expected, found: len });
            }
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '#' => occupancy.push(true),
                    '.' => occupancy.push(false),
                    ch => return Err(MapError::InvalidCell { ch, row, col }),
                }
            }
            height += 1;
        }
        let width = width.unwrap_or(0);
        Self::from_occupancy(width, height, resolution, occupancy)
    }

    /// Builds a map from a row-major occupancy vector (`true` = occupied).
    pub fn from_occupancy(
        width: usize,
        height: usize,
        resolution: f64,
        occupancy: Vec<bool>,
    ) -> Result<Self, MapError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::BadHeader(format!("resolution {resolution}")));
        }
        assert_eq!(occupancy.len(), width * height, "occupancy size mismatch");
        if !occupancy.iter().any(|&o| !o) {
            return Err(MapError::EmptyMap);
        }
        let (labels, count) = label_components(width, height, &occupancy);
        let mut map = Self {
            width,
            height,
            resolution,
            blocked: occupancy.clone(),
            occupancy,
            labels,
            representatives: Vec::new(),
            rays: Vec::new(),
            clearance: 0.0,
            lattice: OnceLock::new(),
        };
        debug_assert!(count as usize <= width * height);
        map.rays = build_rays(&map)?;
        map.representatives = map.rays.iter().map(|r| r.origin).collect();
        Ok(map)
    }

    /// Returns a copy whose collision mask is the occupancy dilated by
    /// `radius` meters (plus the map border). Obstacle components, rays and
    /// therefore homology signatures are unchanged.
    pub fn with_clearance(&self, radius: f64) -> Self {
        let mut out = self.clone();
        out.lattice = OnceLock::new();
        out.clearance = radius.max(0.0);
        if radius <= 0.0 {
            out.blocked = self.occupancy.clone();
            return out;
        }
        let r = radius / self.resolution;
        let reach = r.ceil() as isize;
        let mut blocked = vec![false; self.occupancy.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                // A cell is blocked when its center lies within `radius` of an
                // occupied cell or of the map border.
                let cx = x as f64 + 0.5;
                let cy = y as f64 + 0.5;
                let near_border = cx < r || cy < r
                    || (self.width as f64 - cx) < r
                    || (self.height as f64 - cy) < r;
                let mut hit = near_border || self.occupancy[y * self.width + x];
                'search: for dy in -reach..=reach {
                    if hit {
                        break;
                    }
                    for dx in -reach..=reach {
                        let nx = x as isize + dx;
                        let ny = y as isize + dy;
                        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                            continue;
                        }
                        if !self.occupancy[ny as usize * self.width + nx as usize] {
                            continue;
                        }
                        // Distance from the cell center to the occupied square.
                        let qx = (cx - cx.clamp(nx as f64, nx as f64 + 1.0)).abs();
                        let qy = (cy - cy.clamp(ny as f64, ny as f64 + 1.0)).abs();
                        if qx * qx + qy * qy < r * r {
                            hit = true;
                            break 'search;
                        }
                    }
                }
                blocked[y * self.width + x] = hit;
            }
        }
        out.blocked = blocked;
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Meters per cell.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Planning clearance in meters used to build the collision mask.
    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// Map extent in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupancy[self.index(cell)]
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.index(cell)]
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub(crate) fn lattice_cache(&self) -> &OnceLock<LatticeMask> {
        &self.lattice
    }

    /// Row-major collision mask (occupancy dilated by the clearance).
    pub fn blocked_mask(&self) -> &[bool] {
        &self.blocked
    }

    /// Obstacle component label of a cell, 0 for free cells.
    pub fn label(&self, cell: Cell) -> u32 {
        self.labels[self.index(cell)]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of obstacle components `o`.
    pub fn component_count(&self) -> usize {
        self.rays.len()
    }

    pub fn representatives(&self) -> &[Cell] {
        &self.representatives
    }

    /// Representative point ζᵢ of each component (center of its ray origin
    /// cell), in meters.
    pub fn representative_points(&self) -> Vec<Point> {
        self.rays.iter().map(|r| r.anchor(self.resolution)).collect()
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    /// Cell containing a point, if inside the map.
    pub fn cell_at(&self, p: &Point) -> Option<Cell> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let x = (p.x / self.resolution).floor() as usize;
        let y = (p.y / self.resolution).floor() as usize;
        (x < self.width && y < self.height).then_some(Cell { x, y })
    }

    pub fn cell_center(&self, cell: Cell) -> Point {
        Point::new(
            (cell.x as f64 + 0.5) * self.resolution,
            (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    /// True when the point lies inside the map on a cell that is not blocked
    /// by the collision mask.
    pub fn is_free_point(&self, p: &Point) -> bool {
        self.cell_at(p).is_some_and(|c| !self.blocked[self.index(c)])
    }

    /// True when the point lies inside the map on an unoccupied cell
    /// (ignores the planning clearance).
    pub fn is_open_point(&self, p: &Point) -> bool {
        self.cell_at(p).is_some_and(|c| !self.occupancy[self.index(c)])
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| Cell { x, y }))
            .filter(move |&c| !self.is_occupied(c))
    }

    /// Closest point on any occupied cell or on the map border.
    pub fn nearest_obstacle_point(&self, p: &Point, search_radius: f64) -> Point {
        let (w, h) = self.extent();
        let mut best = Point::new(p.x.clamp(0.0, w), 0.0);
        let mut best_d = p.y.abs();
        let border = [
            (Point::new(p.x.clamp(0.0, w), h), (h - p.y).abs()),
            (Point::new(0.0, p.y.clamp(0.0, h)), p.x.abs()),
            (Point::new(w, p.y.clamp(0.0, h)), (w - p.x).abs()),
        ];
        for (q, d) in border {
            if d < best_d {
                best = q;
                best_d = d;
            }
        }
        let reach = (search_radius.min(best_d) / self.resolution).ceil() as isize + 1;
        let cx = (p.x / self.resolution).floor() as isize;
        let cy = (p.y / self.resolution).floor() as isize;
        for ny in (cy - reach)..=(cy + reach) {
            for nx in (cx - reach)..=(cx + reach) {
                if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                    continue;
                }
                if !self.occupancy[ny as usize * self.width + nx as usize] {
                    continue;
                }
                let x0 = nx as f64 * self.resolution;
                let y0 = ny as f64 * self.resolution;
                let q = Point::new(
                    p.x.clamp(x0, x0 + self.resolution),
                    p.y.clamp(y0, y0 + self.resolution),
                );
                let d = (q - p).norm();
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
        }
        best
    }

    /// Serializes back to the ASCII map format.
    pub fn to_text(&self) -> String {
        let mut out = format!("resolution {}\n", self.resolution);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.occupancy[y * self.width + x] { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

fn parse_header(line: &str) -> Result<f64, MapError> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some("resolution"), Some(value), None) => value
            .parse::<f64>()
            .ok()
            .filter(|r| r.is_finite() && *r > 0.0)
            .ok_or_else(|| MapError::BadHeader(line.to_string())),
        _ => Err(MapError::BadHeader(line.to_string())),
    }
}

/// 4-connected flood fill over occupied cells. Labels are assigned in
/// row-major order of each component's first cell, starting at 1.
pub fn label_components(width: usize, height: usize, occupancy: &[bool]) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; width * height];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..width * height {
        if !occupancy[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if occupancy[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
    }
    (labels, next)
}
