use super::TopoError;
use crate::gridmap::GridMap;
use crate::Point;

/// Spatio-temporal lattice spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationParams {
    /// Maximum speed, m/s.
    pub v_max: f64,
    /// Time-layer spacing, s.
    pub dt: f64,
    /// Distance covered in one layer at full speed, m.
    pub dr: f64,
    /// Fine grid spacing, a quarter of `dr`.
    pub dr_fine: f64,
}

impl DiscretizationParams {
    pub fn new(v_max: f64, dt: f64) -> Result<Self, TopoError> {
        if !(v_max > 0.0 && v_max.is_finite() && dt > 0.0 && dt.is_finite()) {
            return Err(TopoError::InvalidParams(format!("v_max = {v_max}, dt = {dt}")));
        }
        let dr = v_max * dt;
        Ok(Self { v_max, dt, dr, dr_fine: dr / 4.0 })
    }

    pub fn position(&self, x: i32, y: i32) -> Point {
        Point::new(x as f64 * self.dr_fine, y as f64 * self.dr_fine)
    }

    pub fn time(&self, t: u32) -> f64 {
        t as f64 * self.dt
    }
}

impl Default for DiscretizationParams {
    fn default() -> Self {
        Self::new(1.0, 0.25).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpacetimeVertex {
    pub x: i32,
    pub y: i32,
    pub t: u32,
}

impl SpacetimeVertex {
    pub const fn new(x: i32, y: i32, t: u32) -> Self {
        Self { x, y, t }
    }

    pub fn position(&self, disc: &DiscretizationParams) -> Point {
        disc.position(self.x, self.y)
    }
}

/// Per-layer moves in fine-grid units. All have length 4 or 3√2.
pub const MOVES: [(i32, i32); 8] = [(4, 0), (3, 3), (0, 4), (-3, 3), (-4, 0), (-3, -3), (0, -4), (3, -3)];

pub fn move_length(dx: i32, dy: i32, disc: &DiscretizationParams) -> f64 {
    (((dx * dx + dy * dy) as f64).sqrt()) * disc.dr_fine
}

/// Whether a lattice point lies on an unblocked cell.
pub fn vertex_free(x: i32, y: i32, disc: &DiscretizationParams, map: &GridMap) -> bool {
    map.is_free_point(&disc.position(x, y))
}

/// Swept check of the straight segment between two points, sampled at half
/// the fine spacing.
pub fn segment_free(p0: &Point, p1: &Point, disc: &DiscretizationParams, map: &GridMap) -> bool {
    let len = (p1 - p0).norm();
    let n = (len / (0.5 * disc.dr_fine)).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let s = k as f64 / n as f64;
        map.is_free_point(&(p0 + (p1 - p0) * s))
    })
}

const VERTEX_BIT: u16 = 1 << 8;

/// Precomputed free flags for every lattice point of a map: bit `i` is set
/// when move `MOVES[i]` is collision free, bit 8 when the point itself is.
#[derive(Clone)]
pub(crate) struct LatticeMask {
    dr_fine: f64,
    nx: i32,
    ny: i32,
    bits: Vec<u16>,
}

impl std::fmt::Debug for LatticeMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LatticeMask({}x{} @ {})", self.nx, self.ny, self.dr_fine)
    }
}

impl LatticeMask {
    fn build(disc: &DiscretizationParams, map: &GridMap) -> Self {
        let (w, h) = map.extent();
        let nx = (w / disc.dr_fine).floor() as i32 + 1;
        let ny = (h / disc.dr_fine).floor() as i32 + 1;
        let mut bits = vec![0u16; (nx * ny) as usize];
        for y in 0..ny {
            for x in 0..nx {
                let p0 = disc.position(x, y);
                if !map.is_free_point(&p0) {
                    continue;
                }
                let mut b = VERTEX_BIT;
                for (i, &(dx, dy)) in MOVES.iter().enumerate() {
                    if segment_free(&p0, &disc.position(x + dx, y + dy), disc, map) {
                        b |= 1 << i;
                    }
                }
                bits[(y * nx + x) as usize] = b;
            }
        }
        Self { dr_fine: disc.dr_fine, nx, ny, bits }
    }

    fn get(&self, x: i32, y: i32) -> u16 {
        if x < 0 || y < 0 || x >= self.nx || y >= self.ny {
            0
        } else {
            self.bits[(y * self.nx + x) as usize]
        }
    }
}

/// The map's cached table when it was built for this spacing.
fn lattice_mask<'a>(disc: &DiscretizationParams, map: &'a GridMap) -> Option<&'a LatticeMask> {
    let m = map.lattice_cache().get_or_init(|| LatticeMask::build(disc, map));
    (m.dr_fine == disc.dr_fine).then_some(m)
}

/// Collision-free successors of `v` one layer later, with travel-time cost.
/// The wait move costs one layer duration.
pub fn successors(
    v: &SpacetimeVertex,
    disc: &DiscretizationParams,
    map: &GridMap,
    allow_wait: bool,
) -> Vec<(SpacetimeVertex, f64)> {
    let mut out = Vec::with_capacity(9);
    let p0 = v.position(disc);
    let bits = match lattice_mask(disc, map) {
        Some(m) => m.get(v.x, v.y),
        None => {
            if !map.is_free_point(&p0) {
                return out;
            }
            MOVES.iter().enumerate().fold(VERTEX_BIT, |b, (i, &(dx, dy))| {
                if segment_free(&p0, &disc.position(v.x + dx, v.y + dy), disc, map) {
                    b | 1 << i
                } else {
                    b
                }
            })
        }
    };
    if bits & VERTEX_BIT == 0 {
        return out;
    }
    for (i, &(dx, dy)) in MOVES.iter().enumerate() {
        if bits & (1 << i) != 0 {
            out.push((SpacetimeVertex::new(v.x + dx, v.y + dy, v.t + 1), move_length(dx, dy, disc) / disc.v_max));
        }
    }
    if allow_wait {
        out.push((SpacetimeVertex::new(v.x, v.y, v.t + 1), disc.dt));
    }
    out
}

/// Nearest free lattice point to `p`, optionally restricted to points with
/// `(x + y) mod 2 == parity` (the set reachable from a given vertex).
pub fn snap_to_lattice(
    p: &Point,
    disc: &DiscretizationParams,
    map: &GridMap,
    parity: Option<i32>,
) -> Option<(i32, i32)> {
    let cx = (p.x / disc.dr_fine).round() as i32;
    let cy = (p.y / disc.dr_fine).round() as i32;
    let (w, h) = map.extent();
    let max_ring = ((w.max(h) / disc.dr_fine).ceil() as i32).max(1);
    let mut best: Option<(f64, (i32, i32))> = None;
    for ring in 0..=max_ring {
        // Every point on ring k is at least (k - 1)·dr_fine from p.
        if let Some((d, _)) = best {
            if ((ring - 1) as f64 * disc.dr_fine).max(0.0) > d {
                break;
            }
        }
        for y in (cy - ring)..=(cy + ring) {
            for x in (cx - ring)..=(cx + ring) {
                if (x - cx).abs() != ring && (y - cy).abs() != ring {
                    continue;
                }
                if parity.is_some_and(|par| (x + y).rem_euclid(2) != par) {
                    continue;
                }
                if !vertex_free(x, y, disc, map) {
                    continue;
                }
                let d = (disc.position(x, y) - p).norm();
                if best.is_none_or(|(bd, bxy)| d < bd || (d == bd && (x, y) < bxy)) {
                    best = Some((d, (x, y)));
                }
            }
        }
    }
    best.map(|(_, xy)| xy)
}
