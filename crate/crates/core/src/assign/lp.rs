//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Sized for the handful of variables the ensemble model needs; no attempt at
//! sparsity or numerical refinement.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("infeasible")]
    Infeasible,
    #[error("unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `min cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-11;

struct Tableau {
    /// Constraint rows, each `cols + 1` wide with the right-hand side last.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row, right-hand side holds minus the objective.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
        self.basis[r] = c;
    }

    /// Sets the objective row for costs `cost` given the current basis.
    fn price(&mut self, cost: &[f64]) {
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let f = self.obj[b];
            if f != 0.0 {
                for (v, p) in self.obj.iter_mut().zip(&self.rows[r]) {
                    *v -= f * p;
                }
            }
        }
    }

    /// Runs simplex iterations over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        for _ in 0..50_000 {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(f64, usize, usize)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some((best, _, var)) => {
                            ratio < best - EPS || (ratio <= best + EPS && self.basis[r] < var)
                        }
                    };
                    if better {
                        leave = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            let Some((_, r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, enter);
        }
        Err(LpError::IterationLimit)
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.c.len();
    if lp.a_ub.len() != lp.b_ub.len() || lp.a_eq.len() != lp.b_eq.len() {
        return Err(LpError::Dimension("row/rhs count".into()));
    }
    if lp.a_ub.iter().chain(&lp.a_eq).any(|r| r.len() != n) {
        return Err(LpError::Dimension("row width".into()));
    }
    let n_ub = lp.a_ub.len();
    let n_rows = n_ub + lp.a_eq.len();
    // Columns: originals, one slack per inequality, one artificial per row.
    let slack0 = n;
    let art0 = n + n_ub;
    let cols = art0 + n_rows;
    let mut rows = Vec::with_capacity(n_rows);
    let mut basis = Vec::with_capacity(n_rows);
    for (i, (a, &b)) in lp.a_ub.iter().zip(&lp.b_ub).chain(lp.a_eq.iter().zip(&lp.b_eq)).enumerate() {
        let mut row = vec![0.0; cols + 1];
        row[..n].copy_from_slice(a);
        if i < n_ub {
            row[slack0 + i] = 1.0;
        }
        row[cols] = b;
        if b < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        if i < n_ub && b >= 0.0 {
            basis.push(slack0 + i);
        } else {
            row[art0 + i] = 1.0;
            basis.push(art0 + i);
        }
        rows.push(row);
    }
    let mut t = Tableau { rows, obj: Vec::new(), basis, cols };

    let mut phase1 = vec![0.0; cols];
    phase1[art0..].iter_mut().for_each(|v| *v = 1.0);
    t.price(&phase1);
    t.optimize(cols)?;
    if -t.obj[cols] > 1e-9 {
        return Err(LpError::Infeasible);
    }
    // Drive zero-level artificials out of the basis, dropping redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| t.rows[r][c].abs() > 1e-9) {
                t.pivot(r, c);
            } else {
                t.rows.remove(r);
                t.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }

    let mut phase2 = lp.c.clone();
    phase2.resize(cols, 0.0);
    t.price(&phase2);
    t.optimize(art0)?;

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rows[r][cols].max(0.0);
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram {
            c: vec![-3.0, -5.0],
            a_ub: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            b_ub: vec![4.0, 12.0, 18.0],
            ..Default::default()
        };
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_greater_equal() {
        // min x + y, x + y = 2, x >= 0.5 (as -x <= -0.5), y <= 1
        let lp = LinearProgram {
            c: vec![1.0, 2.0],
            a_ub: vec![vec![-1.0, 0.0], vec![0.0, 1.0]],
            b_ub: vec![-0.5, 1.0],
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![2.0],
        };
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && s.x[1].abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = LinearProgram {
            c: vec![1.0],
            a_ub: vec![vec![1.0]],
            b_ub: vec![1.0],
            a_eq: vec![vec![1.0]],
            b_eq: vec![2.0],
        };
        assert_eq!(solve(&lp), Err(LpError::Infeasible));
        let lp = LinearProgram { c: vec![-1.0, 0.0], a_ub: vec![vec![0.0, 1.0]], b_ub: vec![1.0], ..Default::default() };
        assert_eq!(solve(&lp), Err(LpError::Unbounded));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram {
            c: vec![1.0, 1.0],
            a_eq: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            b_eq: vec![1.0, 2.0],
            ..Default::default()
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let lp = LinearProgram {
            c: vec![-0.75, 150.0, -0.02, 6.0],
            a_ub: vec![
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            b_ub: vec![0.0, 0.0, 1.0],
            ..Default::default()
        };
        let s = solve(&lp).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9);
    }
}
