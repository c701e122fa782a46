use super::lp::{self, LinearProgram};
use super::{AssignError, AssignParams, ClassCosts, ProbabilityVector};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSolution {
    pub p: ProbabilityVector,
    /// `max_j K_j(p)`, seconds.
    pub t: f64,
    /// The overlap term vanished, so every `p` is optimal and uniform was
    /// returned.
    pub degenerate: bool,
}

/// Minimizes `max_j K_j(p)` with `K_j = n·b·Σ_k overlap[j][k]·p_k`.
///
/// The factor `n·b` is pulled out of the program, so the returned `p` is the
/// same for every `n`. Among optimal points the one with the smallest
/// largest component is returned.
pub fn solve_ensemble(costs: &ClassCosts, params: &AssignParams) -> Result<EnsembleSolution, AssignError> {
    let m = costs.m();
    if m == 0 {
        return Err(AssignError::InvalidParams("no classes".into()));
    }
    let scale = params.n as f64 * params.b;
    let o = &costs.overlap;
    if scale <= 0.0 || o.iter().flatten().all(|&v| v == 0.0) {
        return Ok(EnsembleSolution { p: ProbabilityVector::uniform(m), t: 0.0, degenerate: true });
    }

    // Epigraph form over (p_1..p_m, t).
    let mut c = vec![0.0; m + 1];
    c[m] = 1.0;
    let a_ub: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut row = o[j].clone();
            row.push(-1.0);
            row
        })
        .collect();
    let mut simplex_row = vec![1.0; m];
    simplex_row.push(0.0);
    let stage1 = lp::solve(&LinearProgram {
        c,
        a_ub,
        b_ub: vec![0.0; m],
        a_eq: vec![simplex_row.clone()],
        b_eq: vec![1.0],
    })?;
    let t_star = stage1.objective;

    // Tie-break over the optimal face: minimize the largest probability.
    let mut c2 = vec![0.0; m + 1];
    c2[m] = 1.0;
    let bound = t_star + 1e-12 * t_star.abs().max(1.0);
    let mut a_ub2 = Vec::with_capacity(2 * m);
    let mut b_ub2 = Vec::with_capacity(2 * m);
    for j in 0..m {
        let mut row = o[j].clone();
        row.push(0.0);
        a_ub2.push(row);
        b_ub2.push(bound);
        let mut cap = vec![0.0; m + 1];
        cap[j] = 1.0;
        cap[m] = -1.0;
        a_ub2.push(cap);
        b_ub2.push(0.0);
    }
    let x = match lp::solve(&LinearProgram { c: c2, a_ub: a_ub2, b_ub: b_ub2, a_eq: vec![simplex_row], b_eq: vec![1.0] }) {
        Ok(s) => s.x,
        Err(_) => stage1.x,
    };
    let p = ProbabilityVector::from_projection(&x[..m]);
    let t = (0..m)
        .map(|j| scale * o[j].iter().zip(p.as_slice()).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnsembleSolution { p, t, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs(overlap: Vec<Vec<f64>>) -> ClassCosts {
        let m = overlap.len();
        ClassCosts { base: vec![1.0; m], traffic: vec![0.0; m], overlap }
    }

    #[test]
    fn two_by_two_closed_form() {
        let sol = solve_ensemble(&costs(vec![vec![2.0, 1.0], vec![1.0, 2.0]]), &AssignParams::default()).unwrap();
        assert!((sol.p[0] - 0.5).abs() < 1e-9, "{:?}", sol.p);
        assert!(!sol.degenerate);
    }

    #[test]
    fn flat_overlap_gives_uniform() {
        let sol = solve_ensemble(&costs(vec![vec![1.0; 3]; 3]), &AssignParams::default()).unwrap();
        for j in 0..3 {
            assert!((sol.p[j] - 1.0 / 3.0).abs() < 1e-9, "{:?}", sol.p);
        }
    }

    #[test]
    fn zero_overlap_is_degenerate() {
        let sol = solve_ensemble(&costs(vec![vec![0.0; 2]; 2]), &AssignParams::default()).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.p, ProbabilityVector::uniform(2));
    }

    #[test]
    fn asymmetric_equalizes_active_classes() {
        // 2x2 with K_1 = 4 p1 + p2, K_2 = p1 + 2 p2 -> equal at p1 = 1/4.
        let sol = solve_ensemble(&costs(vec![vec![4.0, 1.0], vec![1.0, 2.0]]), &AssignParams::default()).unwrap();
        assert!((sol.p[0] - 0.25).abs() < 1e-9, "{:?}", sol.p);
    }
}
