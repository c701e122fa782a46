use super::costs::cost_from_counts;
use super::{AssignError, AssignParams, ClassCosts, ProbabilityVector};

/// `M[j][k]` is the group cost of the pair choice `(j, k)`. With `scaled`,
/// each of the two robots counts for `n / 2` inside `D_j`.
pub fn two_robot_matrix(costs: &ClassCosts, params: &AssignParams, scaled: bool) -> Vec<Vec<f64>> {
    let m = costs.m();
    let scale = if scaled { params.n as f64 / 2.0 } else { 1.0 };
    let mut out = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in 0..m {
            let mut counts = vec![0usize; m];
            counts[j] += 1;
            counts[k] += 1;
            out[j][k] = cost_from_counts(&counts, scale, costs, params);
        }
    }
    out
}

fn quad(mat: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
    mat.iter().zip(x).map(|(row, xi)| xi * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()).sum()
}

/// Minimizes `pᵀ M p` over the simplex with scaled counting.
pub fn solve_two_robot(costs: &ClassCosts, params: &AssignParams) -> Result<ProbabilityVector, AssignError> {
    solve_two_robot_with(costs, params, true)
}

/// Projected gradient with exact line search along each projected step.
pub fn solve_two_robot_with(
    costs: &ClassCosts,
    params: &AssignParams,
    scaled: bool,
) -> Result<ProbabilityVector, AssignError> {
    let m = costs.m();
    if m == 0 {
        return Err(AssignError::InvalidParams("no classes".into()));
    }
    let mut mat = two_robot_matrix(costs, params, scaled);
    // On the simplex pᵀ(M - c·11ᵀ)p = pᵀMp - c, so removing the mean entry
    // leaves the minimizer alone and lets the step size follow the curvature
    // that matters.
    let c = mat.iter().flatten().sum::<f64>() / (m * m) as f64;
    mat.iter_mut().flatten().for_each(|v| *v -= c);
    let norm = mat.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let eta = 1.0 / (2.0 * norm).max(1e-300);
    let mut x = vec![1.0 / m as f64; m];
    for _ in 0..1_000_000 {
        let g: Vec<f64> = (0..m)
            .map(|j| (0..m).map(|k| (mat[j][k] + mat[k][j]) * x[k]).sum())
            .collect();
        let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - eta * b).collect();
        let y = super::project_to_simplex(&trial);
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        if d.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-13 * eta.min(1.0) {
            break;
        }
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let curv = quad(&mat, &d, &d);
        let tau = if curv > 0.0 { (-slope / (2.0 * curv)).clamp(0.0, 1.0) } else { 1.0 };
        if tau == 0.0 {
            break;
        }
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += tau * di;
        }
    }
    let fx = quad(&mat, &x, &x);
    if let Some(j) = (0..m).find(|&j| mat[j][j] < fx - 1e-12) {
        let best = (0..m).min_by(|&a, &b| mat[a][a].total_cmp(&mat[b][b])).unwrap_or(j);
        return Ok(ProbabilityVector::delta(m, best));
    }
    Ok(ProbabilityVector::from_projection(&x))
}
