use super::{Cell, GridMap, MapError};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RayDirection {
    /// Toward increasing row index.
    PlusY,
    /// Toward row 0.
    MinusY,
}

/// Axis-aligned ray from a representative cell of one obstacle component to
/// the map border.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub component: u32,
    pub origin: Cell,
    pub direction: RayDirection,
    pub cells: Vec<Cell>,
}

impl Ray {
    fn new(component: u32, origin: Cell, direction: RayDirection, height: usize) -> Self {
        let cells = match direction {
            RayDirection::PlusY => (origin.y..height).map(|y| Cell::new(origin.x, y)).collect(),
            RayDirection::MinusY => (0..=origin.y).rev().map(|y| Cell::new(origin.x, y)).collect(),
        };
        Self { component, origin, direction, cells }
    }

    /// Center of the origin cell, in meters.
    pub fn anchor(&self, resolution: f64) -> Point {
        Point::new(
            (self.origin.x as f64 + 0.5) * resolution,
            (self.origin.y as f64 + 0.5) * resolution,
        )
    }

    /// x coordinate of the ray's supporting line.
    pub fn line_x(&self, resolution: f64) -> f64 {
        (self.origin.x as f64 + 0.5) * resolution
    }

    /// Whether a point on the supporting line at height `y` lies on the ray.
    pub fn covers_y(&self, y: f64, resolution: f64) -> bool {
        let y0 = (self.origin.y as f64 + 0.5) * resolution;
        match self.direction {
            RayDirection::PlusY => y >= y0,
            RayDirection::MinusY => y <= y0,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct ColumnUse {
    plus: Option<usize>,
    minus: Option<usize>,
}

#[derive(Clone, Copy)]
struct Choice {
    col: usize,
    dir: RayDirection,
}

const SEARCH_BUDGET: usize = 2_000_000;

/// Picks one ray per obstacle component so that no two rays share a cell.
///
/// Rays prefer `+y` in a column of their own (columns nearest the
/// component's middle first), then `-y` in a free column, and finally a
/// column already holding one ray of the opposite direction when the two
/// cannot overlap. A depth-first search backtracks over these options.
pub fn build_rays(map: &GridMap) -> Result<Vec<Ray>, MapError> {
    let (w, h) = (map.width(), map.height());
    let count = map.labels().iter().copied().max().unwrap_or(0) as usize;
    if count == 0 {
        return Ok(Vec::new());
    }
    // Per component and column: (top-most row, bottom-most row).
    let mut extents: Vec<Vec<Option<(usize, usize)>>> = vec![vec![None; w]; count];
    for (y, row) in map.labels().chunks(w).enumerate() {
        for (x, &l) in row.iter().enumerate() {
            let l = l as usize;
            if l == 0 {
                continue;
            }
            let e = &mut extents[l - 1][x];
            *e = Some(match *e {
                None => (y, y),
                Some((top, bottom)) => (top.min(y), bottom.max(y)),
            });
        }
    }
    let columns: Vec<Vec<usize>> = extents
        .iter()
        .map(|ext| {
            let mut cols: Vec<usize> = (0..w).filter(|&x| ext[x].is_some()).collect();
            let lo = cols[0] as f64;
            let hi = cols[cols.len() - 1] as f64;
            let mid = 0.5 * (lo + hi);
            cols.sort_by(|a, b| {
                ((*a as f64 - mid).abs())
                    .partial_cmp(&(*b as f64 - mid).abs())
                    .unwrap()
                    .then(a.cmp(b))
            });
            cols
        })
        .collect();

    let mut usage = vec![ColumnUse::default(); w];
    let mut chosen: Vec<Choice> = Vec::with_capacity(count);
    let mut budget = SEARCH_BUDGET;
    if !assign(0, &extents, &columns, &mut usage, &mut chosen, &mut budget) {
        return Err(MapError::RayConstructionFailed { component: chosen.len() + 1 });
    }
    Ok(chosen
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (top, bottom) = extents[i][c.col].unwrap();
            let row = match c.dir {
                RayDirection::PlusY => bottom,
                RayDirection::MinusY => top,
            };
            Ray::new(i as u32 + 1, Cell::new(c.col, row), c.dir, h)
        })
        .collect())
}

fn options(
    comp: usize,
    extents: &[Vec<Option<(usize, usize)>>],
    columns: &[Vec<usize>],
    usage: &[ColumnUse],
) -> Vec<Choice> {
    let mut out = Vec::new();
    let cols = &columns[comp];
    let free = |c: usize| usage[c].plus.is_none() && usage[c].minus.is_none();
    out.extend(cols.iter().filter(|&&c| free(c)).map(|&col| Choice { col, dir: RayDirection::PlusY }));
    out.extend(cols.iter().filter(|&&c| free(c)).map(|&col| Choice { col, dir: RayDirection::MinusY }));
    for &col in cols {
        let (top, bottom) = extents[comp][col].unwrap();
        let u = usage[col];
        match (u.plus, u.minus) {
            // Existing -y ray covers rows [0, m]; ours covers [bottom, h).
            (None, Some(m)) if m < bottom => out.push(Choice { col, dir: RayDirection::PlusY }),
            // Existing +y ray covers rows [p, h); ours covers [0, top].
            (Some(p), None) if top < p => out.push(Choice { col, dir: RayDirection::MinusY }),
            _ => {}
        }
    }
    out
}

fn assign(
    comp: usize,
    extents: &[Vec<Option<(usize, usize)>>],
    columns: &[Vec<usize>],
    usage: &mut [ColumnUse],
    chosen: &mut Vec<Choice>,
    budget: &mut usize,
) -> bool {
    if comp == extents.len() {
        return true;
    }
    for choice in options(comp, extents, columns, usage) {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let (top, bottom) = extents[comp][choice.col].unwrap();
        let saved = usage[choice.col];
        match choice.dir {
            RayDirection::PlusY => usage[choice.col].plus = Some(bottom),
            RayDirection::MinusY => usage[choice.col].minus = Some(top),
        }
        chosen.push(choice);
        if assign(comp + 1, extents, columns, usage, chosen, budget) {
            return true;
        }
        chosen.pop();
        usage[choice.col] = saved;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn disjoint(rays: &[Ray]) -> bool {
        let mut seen = HashSet::new();
        rays.iter().flat_map(|r| r.cells.iter()).all(|c| seen.insert(*c))
    }

    #[test]
    fn distinct_columns_get_parallel_plus_rays() {
        let map = GridMap::from_text("resolution 1\n.....\n.#.#.\n.....\n").unwrap();
        let rays = map.rays();
        assert_eq!(rays.len(), 2);
        assert!(rays.iter().all(|r| r.direction == RayDirection::PlusY));
        assert!(disjoint(rays));
    }

    #[test]
    fn stacked_obstacles_split_directions() {
        let map = GridMap::from_text("resolution 1\n...\n.#.\n...\n.#.\n...\n").unwrap();
        let rays = map.rays();
        assert_eq!(rays.len(), 2);
        assert_eq!(rays[0].direction, RayDirection::MinusY);
        assert_eq!(rays[1].direction, RayDirection::PlusY);
        assert!(disjoint(rays));
        for r in rays {
            assert_eq!(r.cells[0], r.origin);
            assert_eq!(map.label(r.origin), r.component);
        }
    }

    #[test]
    fn three_stacked_single_column_obstacles_fail() {
        let err = GridMap::from_text("resolution 1\n.\n#\n.\n#\n.\n#\n.\n").unwrap_err();
        assert!(matches!(err, MapError::RayConstructionFailed { .. }));
    }

    #[test]
    fn ray_reaches_border() {
        let map = GridMap::from_text("resolution 0.5\n....\n.##.\n.##.\n....\n....\n").unwrap();
        let r = &map.rays()[0];
        let last = *r.cells.last().unwrap();
        assert!(last.y == 0 || last.y == map.height() - 1);
    }
}
