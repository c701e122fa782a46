use std::fmt::Write as _;

use crate::topo::{DiscretizationParams, SpacetimeVertex};
use crate::{Point, Vec2};

/// Per-layer smoothing weights for the center, the 4 edge neighbors and the
/// 4 corner neighbors. They should sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionKernel {
    pub center: f64,
    pub edge: f64,
    pub corner: f64,
}

impl DiffusionKernel {
    pub const IDENTITY: Self = Self { center: 1.0, edge: 0.0, corner: 0.0 };
}

impl Default for DiffusionKernel {
    fn default() -> Self {
        Self { center: 0.6, edge: 0.08, corner: 0.02 }
    }
}

/// One sensed agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub position: Point,
    pub velocity: Vec2,
    /// Radius of the disk marked as occupied at layer 0, meters. Callers
    /// usually pass the sum of both agents' safety radii.
    pub radius: f64,
}

/// Dense window of lattice-point values for one layer.
#[derive(Debug, Clone, PartialEq)]
struct Window {
    x0: i32,
    y0: i32,
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Window {
    fn new(x0: i32, y0: i32, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h, data: vec![0.0; w * h] }
    }

    fn get(&self, x: i32, y: i32) -> f64 {
        let (dx, dy) = (x - self.x0, y - self.y0);
        if dx < 0 || dy < 0 || dx as usize >= self.w || dy as usize >= self.h {
            return 0.0;
        }
        self.data[dy as usize * self.w + dx as usize]
    }

    fn diffuse(&self, k: &DiffusionKernel) -> Self {
        let mut out = Self::new(self.x0, self.y0, self.w, self.h);
        let (w, h) = (self.w, self.h);
        let d = &self.data;
        for y in 0..h {
            for x in 0..w {
                let v = if x > 0 && y > 0 && x + 1 < w && y + 1 < h {
                    let i = y * w + x;
                    let edge = d[i - 1] + d[i + 1] + d[i - w] + d[i + w];
                    let corner = d[i - w - 1] + d[i - w + 1] + d[i + w - 1] + d[i + w + 1];
                    k.center * d[i] + k.edge * edge + k.corner * corner
                } else {
                    let (gx, gy) = (x as i32 + self.x0, y as i32 + self.y0);
                    let edge = self.get(gx - 1, gy) + self.get(gx + 1, gy) + self.get(gx, gy - 1) + self.get(gx, gy + 1);
                    let corner = self.get(gx - 1, gy - 1)
                        + self.get(gx + 1, gy - 1)
                        + self.get(gx - 1, gy + 1)
                        + self.get(gx + 1, gy + 1);
                    k.center * self.get(gx, gy) + k.edge * edge + k.corner * corner
                };
                out.data[y * w + x] = v;
            }
        }
        out
    }

    /// Bilinear value at fractional lattice coordinates.
    #[inline]
    fn bilinear(&self, fx: f64, fy: f64) -> f64 {
        let gx = fx - self.x0 as f64;
        let gy = fy - self.y0 as f64;
        if !(gx > -1.0 && gy > -1.0 && gx < self.w as f64 && gy < self.h as f64) {
            return 0.0;
        }
        // Shifted truncation is a floor for values above -1.
        let ix = (gx + 1.0) as i32 - 1;
        let iy = (gy + 1.0) as i32 - 1;
        let (ax, ay) = (gx - ix as f64, gy - iy as f64);
        let (v00, v10, v01, v11) = if ix >= 0 && iy >= 0 && (ix as usize) + 1 < self.w && (iy as usize) + 1 < self.h {
            let i = iy as usize * self.w + ix as usize;
            (self.data[i], self.data[i + 1], self.data[i + self.w], self.data[i + self.w + 1])
        } else {
            let (x, y) = (ix + self.x0, iy + self.y0);
            (self.get(x, y), self.get(x + 1, y), self.get(x, y + 1), self.get(x + 1, y + 1))
        };
        v00 * (1.0 - ax) * (1.0 - ay) + v10 * ax * (1.0 - ay) + v01 * (1.0 - ax) * ay + v11 * ax * ay
    }

    /// Translates by a real offset in lattice units, splitting mass
    /// bilinearly.
    fn shift(&self, sx: f64, sy: f64) -> Self {
        let (ix, iy) = (sx.floor() as i32, sy.floor() as i32);
        let (fx, fy) = (sx - ix as f64, sy - iy as f64);
        let mut out = Self::new(self.x0 + ix, self.y0 + iy, self.w + 1, self.h + 1);
        for y in 0..self.h {
            for x in 0..self.w {
                let v = self.data[y * self.w + x];
                if v == 0.0 {
                    continue;
                }
                let w = out.w;
                out.data[y * w + x] += v * (1.0 - fx) * (1.0 - fy);
                out.data[y * w + x + 1] += v * fx * (1.0 - fy);
                out.data[(y + 1) * w + x] += v * (1.0 - fx) * fy;
                out.data[(y + 1) * w + x + 1] += v * fx * fy;
            }
        }
        out
    }
}

/// Predicted probability that some sensed agent occupies each lattice point
/// during each of the next `m_max` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyField {
    pub disc: DiscretizationParams,
    /// Absolute layer index of layer 0.
    pub origin_layer: u32,
    pub m_max: usize,
    layers: Vec<Option<Window>>,
}

impl OccupancyField {
    pub fn empty(disc: DiscretizationParams, origin_layer: u32, m_max: usize) -> Self {
        Self { disc, origin_layer, m_max, layers: vec![None; m_max + 1] }
    }

    pub fn origin_time(&self) -> f64 {
        self.disc.time(self.origin_layer)
    }

    /// Value at lattice point `(x, y)` of relative layer `k`; zero outside
    /// the horizon.
    pub fn value(&self, x: i32, y: i32, k: usize) -> f64 {
        match self.layers.get(k) {
            Some(Some(w)) => w.get(x, y),
            _ => 0.0,
        }
    }

    /// Bilinear value at a planar point for relative layer `k`.
    pub fn sample_layer(&self, p: &Point, k: usize) -> f64 {
        match self.layers.get(k) {
            Some(Some(w)) => w.bilinear(p.x / self.disc.dr_fine, p.y / self.disc.dr_fine),
            _ => 0.0,
        }
    }

    /// Value at a planar point and fractional absolute layer, linear in time
    /// between layers.
    pub fn sample(&self, p: &Point, layer: f64) -> f64 {
        let rel = layer - self.origin_layer as f64;
        if rel < 0.0 {
            return self.sample_layer(p, 0);
        }
        let k = rel.floor() as usize;
        let f = rel - k as f64;
        let a = self.sample_layer(p, k);
        if f == 0.0 {
            return a;
        }
        a * (1.0 - f) + self.sample_layer(p, k + 1) * f
    }

    /// Whether layer `k` may be nonzero anywhere in the lattice box.
    fn touches(&self, k: usize, x0: i32, x1: i32, y0: i32, y1: i32) -> bool {
        match self.layers.get(k) {
            Some(Some(w)) => x1 >= w.x0 && y1 >= w.y0 && x0 < w.x0 + w.w as i32 && y0 < w.y0 + w.h as i32,
            _ => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().flatten().all(|w| w.data.iter().all(|&v| v == 0.0))
    }

    /// Pointwise maximum with another field on the same lattice and origin.
    pub fn max_merge(&mut self, other: &Self) {
        assert_eq!(self.origin_layer, other.origin_layer, "fields have different origins");
        for k in 0..self.layers.len().max(other.layers.len()) {
            let a = self.layers.get(k).cloned().flatten();
            let b = other.layers.get(k).cloned().flatten();
            let merged = match (a, b) {
                (None, None) => None,
                (Some(w), None) | (None, Some(w)) => Some(w),
                (Some(a), Some(b)) => Some(merge_windows(&a, &b)),
            };
            if k < self.layers.len() {
                self.layers[k] = merged;
            } else {
                self.layers.push(merged);
            }
        }
        self.m_max = self.m_max.max(other.m_max);
    }

    /// Support of a layer as (lattice x, lattice y, value) for nonzero
    /// entries.
    pub fn support(&self, k: usize) -> Vec<(i32, i32, f64)> {
        let Some(Some(w)) = self.layers.get(k) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for y in 0..w.h {
            for x in 0..w.w {
                let v = w.data[y * w.w + x];
                if v > 0.0 {
                    out.push((w.x0 + x as i32, w.y0 + y as i32, v));
                }
            }
        }
        out
    }

    /// ASCII PGM of one layer over the lattice box `[0, nx) × [0, ny)`.
    pub fn layer_pgm(&self, k: usize, nx: usize, ny: usize) -> String {
        let mut out = format!("P2\n{nx} {ny}\n255\n");
        for y in 0..ny as i32 {
            let row: Vec<String> = (0..nx as i32)
                .map(|x| ((self.value(x, y, k) * 255.0).round() as u32).min(255).to_string())
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

fn merge_windows(a: &Window, b: &Window) -> Window {
    let x0 = a.x0.min(b.x0);
    let y0 = a.y0.min(b.y0);
    let x1 = (a.x0 + a.w as i32).max(b.x0 + b.w as i32);
    let y1 = (a.y0 + a.h as i32).max(b.y0 + b.h as i32);
    let mut out = Window::new(x0, y0, (x1 - x0) as usize, (y1 - y0) as usize);
    for y in 0..out.h as i32 {
        for x in 0..out.w as i32 {
            let (gx, gy) = (x + x0, y + y0);
            out.data[y as usize * out.w + x as usize] = a.get(gx, gy).max(b.get(gx, gy));
        }
    }
    out
}

/// Propagates each observation for `m_max` layers (constant-velocity
/// advection plus diffusion) and combines agents by pointwise maximum.
pub fn predict_occupancy(
    observed: &[Observation],
    kernel: &DiffusionKernel,
    m_max: usize,
    disc: &DiscretizationParams,
    origin_layer: u32,
) -> OccupancyField {
    let singles: Vec<OccupancyField> =
        observed.iter().map(|obs| predict_agent(obs, kernel, m_max, disc, origin_layer)).collect();
    let refs: Vec<&OccupancyField> = singles.iter().collect();
    merge_fields(&refs, disc, origin_layer, m_max)
}

/// Pointwise maximum of fields sharing one lattice, origin and horizon.
pub fn merge_fields(
    fields: &[&OccupancyField],
    disc: &DiscretizationParams,
    origin_layer: u32,
    m_max: usize,
) -> OccupancyField {
    let mut field = OccupancyField::empty(*disc, origin_layer, m_max);
    for k in 0..=m_max {
        let windows: Vec<&Window> = fields.iter().filter_map(|f| f.layers.get(k)?.as_ref()).collect();
        field.layers[k] = merge_many(&windows);
    }
    field
}

/// Pointwise maximum of several windows in one allocation.
fn merge_many(windows: &[&Window]) -> Option<Window> {
    let first = windows.first()?;
    let (mut x0, mut y0) = (first.x0, first.y0);
    let (mut x1, mut y1) = (first.x0 + first.w as i32, first.y0 + first.h as i32);
    for w in &windows[1..] {
        x0 = x0.min(w.x0);
        y0 = y0.min(w.y0);
        x1 = x1.max(w.x0 + w.w as i32);
        y1 = y1.max(w.y0 + w.h as i32);
    }
    let mut out = Window::new(x0, y0, (x1 - x0) as usize, (y1 - y0) as usize);
    for w in windows {
        let (ox, oy) = ((w.x0 - x0) as usize, (w.y0 - y0) as usize);
        for y in 0..w.h {
            let src = &w.data[y * w.w..(y + 1) * w.w];
            let row = (oy + y) * out.w + ox;
            for (d, &v) in out.data[row..row + w.w].iter_mut().zip(src) {
                *d = d.max(v);
            }
        }
    }
    Some(out)
}

/// Prediction for a single agent.
pub fn predict_agent(
    obs: &Observation,
    kernel: &DiffusionKernel,
    m_max: usize,
    disc: &DiscretizationParams,
    origin_layer: u32,
) -> OccupancyField {
    let h = disc.dr_fine;
    let r = (obs.radius / h).ceil() as i32;
    let (cx, cy) = ((obs.position.x / h).round() as i32, (obs.position.y / h).round() as i32);
    let margin = m_max as i32 + 1;
    let x0 = cx - r - margin;
    let y0 = cy - r - margin;
    let side = (2 * (r + margin) + 1) as usize;
    let mut base = Window::new(x0, y0, side, side);
    for y in 0..side {
        for x in 0..side {
            let p = Point::new((x0 + x as i32) as f64 * h, (y0 + y as i32) as f64 * h);
            if (p - obs.position).norm() <= obs.radius {
                base.data[y * side + x] = 1.0;
            }
        }
    }
    let mut field = OccupancyField::empty(*disc, origin_layer, m_max);
    let mut current = base;
    for k in 0..=m_max {
        if k > 0 {
            current = current.diffuse(kernel);
        }
        let offset = obs.velocity * (k as f64 * disc.dt) / h;
        let mut layer = current.shift(offset.x, offset.y);
        layer.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        field.layers[k] = Some(layer);
    }
    field
}

/// Integral of `(1+ι)/(1+ι-P)` over a unit interval where `P` runs linearly
/// from `pa` to `pb`.
fn piece_integral(pa: f64, pb: f64, iota: f64) -> f64 {
    // Free mass 1 - P is exact near P = 1, so the denominator avoids cancellation.
    let (qa, qb) = (1.0 - pa.clamp(0.0, 1.0), 1.0 - pb.clamp(0.0, 1.0));
    let dq = qa - qb;
    if dq.abs() < 1e-12 {
        return (1.0 + iota) / (0.5 * (qa + qb) + iota);
    }
    (1.0 + iota) / dq * ((qa + iota) / (qb + iota)).ln()
}

pub const EDGE_SAMPLES: usize = 8;

/// Occupancy-weighted cost of a one-layer edge. The probability is sampled
/// at 8 evenly spaced points (bilinear in space, linear in time), treated as
/// piecewise linear between samples, and the integrand is integrated exactly
/// on each piece. The mean is scaled by the edge's travel time.
pub fn occupancy_edge_cost(
    a: &SpacetimeVertex,
    b: &SpacetimeVertex,
    field: &OccupancyField,
    iota: f64,
    disc: &DiscretizationParams,
) -> f64 {
    let duration = crate::topo::edge_cost(a, b, disc);
    let pa = a.position(disc);
    let pb = b.position(disc);
    let horizon = field.origin_layer as f64 + field.m_max as f64;
    if a.t as f64 >= horizon + 1.0 {
        return duration;
    }
    let k = a.t.saturating_sub(field.origin_layer) as usize;
    let (x0, x1) = (a.x.min(b.x), a.x.max(b.x) + 1);
    let (y0, y1) = (a.y.min(b.y), a.y.max(b.y) + 1);
    if !field.touches(k, x0, x1, y0, y1) && !field.touches(k + 1, x0, x1, y0, y1) {
        return duration;
    }
    let mut samples = [0.0; EDGE_SAMPLES];
    if a.t < field.origin_layer || b.t != a.t + 1 {
        for (i, s) in samples.iter_mut().enumerate() {
            let u = i as f64 / (EDGE_SAMPLES - 1) as f64;
            let p = pa + (pb - pa) * u;
            *s = field.sample(&p, a.t as f64 + u * (b.t as f64 - a.t as f64));
        }
    } else {
        // Same arithmetic as `sample`, with the two layers looked up once.
        let h = disc.dr_fine;
        let (wa, wb) = (field.layers.get(k).and_then(Option::as_ref), field.layers.get(k + 1).and_then(Option::as_ref));
        for (i, s) in samples.iter_mut().enumerate() {
            let u = i as f64 / (EDGE_SAMPLES - 1) as f64;
            let p = pa + (pb - pa) * u;
            let (fx, fy) = (p.x / h, p.y / h);
            let va = wa.map_or(0.0, |w| w.bilinear(fx, fy));
            *s = if u == 0.0 { va } else { va * (1.0 - u) + wb.map_or(0.0, |w| w.bilinear(fx, fy)) * u };
        }
    }
    let mean: f64 = samples.windows(2).map(|w| piece_integral(w[0], w[1], iota)).sum::<f64>() / (EDGE_SAMPLES - 1) as f64;
    duration * mean
}
