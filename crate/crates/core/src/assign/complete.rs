use super::costs::cost_from_counts;
use super::{AssignError, AssignParams, ClassCosts, ProbabilityVector};

/// Most count vectors the complete model will enumerate.
pub const COMPOSITION_LIMIT: f64 = 1e6;

/// Expected group cost as a polynomial in `p`: one term per way of splitting
/// `n` robots over `m` classes, weighted by its multinomial coefficient.
pub(crate) struct CountPolynomial {
    terms: Vec<(Vec<u32>, f64)>,
    m: usize,
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn for_each_composition(n: u32, m: usize, prefix: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if prefix.len() + 1 == m {
        prefix.push(n);
        f(prefix);
        prefix.pop();
        return;
    }
    for k in 0..=n {
        prefix.push(k);
        for_each_composition(n - k, m, prefix, f);
        prefix.pop();
    }
}

impl CountPolynomial {
    pub fn new(costs: &ClassCosts, params: &AssignParams) -> Result<Self, AssignError> {
        let m = costs.m();
        let n = params.n;
        if n == 0 {
            return Err(AssignError::EmptyChoice);
        }
        let compositions = binomial((n + m - 1) as u64, (m - 1) as u64);
        if compositions > COMPOSITION_LIMIT {
            return Err(AssignError::TooLarge { compositions });
        }
        let mut terms = Vec::with_capacity(compositions as usize);
        for_each_composition(n as u32, m, &mut Vec::with_capacity(m), &mut |counts| {
            let mut left = n as u64;
            let mut multinomial = 1.0;
            for &c in counts {
                multinomial *= binomial(left, c as u64);
                left -= c as u64;
            }
            let as_usize: Vec<usize> = counts.iter().map(|&c| c as usize).collect();
            let c = cost_from_counts(&as_usize, 1.0, costs, params);
            terms.push((counts.to_vec(), multinomial * c));
        });
        Ok(Self { terms, m })
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(counts, coef)| coef * counts.iter().zip(p).map(|(&c, &x)| x.powi(c as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.m];
        for (counts, coef) in &self.terms {
            for j in 0..self.m {
                if counts[j] == 0 {
                    continue;
                }
                let mut prod = coef * counts[j] as f64 * p[j].powi(counts[j] as i32 - 1);
                for k in 0..self.m {
                    if k != j {
                        prod *= p[k].powi(counts[k] as i32);
                    }
                }
                g[j] += prod;
            }
        }
        g
    }
}

/// Expected group cost when each of `params.n` robots picks class `j` with
/// probability `p[j]`. Count scaling is never applied here.
pub fn expected_cost(p: &ProbabilityVector, costs: &ClassCosts, params: &AssignParams) -> Result<f64, AssignError> {
    expected_cost_raw(p.as_slice(), costs, params)
}

/// Same polynomial evaluated at an arbitrary (not necessarily normalized)
/// vector.
pub fn expected_cost_raw(p: &[f64], costs: &ClassCosts, params: &AssignParams) -> Result<f64, AssignError> {
    if p.len() != costs.m() {
        return Err(AssignError::InvalidProbability(format!("length {} for {} classes", p.len(), costs.m())));
    }
    Ok(CountPolynomial::new(costs, params)?.value(p))
}

/// Projected gradient descent with backtracking on a smooth objective over
/// the simplex, started at the barycenter.
pub(crate) fn minimize_on_simplex(
    m: usize,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
) -> Vec<f64> {
    let mut x = vec![1.0 / m as f64; m];
    let mut fx = f(&x);
    let mut eta = 1.0;
    for _ in 0..200_000 {
        let g = grad(&x);
        let (y, fy, step) = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - eta * gi).collect();
            let y = super::project_to_simplex(&trial);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let fy = f(&y);
            let lin: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            let sq: f64 = d.iter().map(|v| v * v).sum();
            if fy <= fx + lin + sq / (2.0 * eta) + 1e-14 * fx.abs() || eta < 1e-30 {
                break (y, fy, sq.sqrt());
            }
            eta *= 0.5;
        };
        x = y;
        fx = fy;
        if step < tol {
            break;
        }
        eta *= 2.0;
    }
    x
}

/// Minimizes the expected cost of the complete model over the simplex.
pub fn solve_complete(costs: &ClassCosts, params: &AssignParams) -> Result<ProbabilityVector, AssignError> {
    let poly = CountPolynomial::new(costs, params)?;
    let m = costs.m();
    let x = minimize_on_simplex(m, |p| poly.value(p), |p| poly.gradient(p), 1e-12);
    // Never return something worse than committing to one class.
    let fx = poly.value(&x);
    let best_vertex = (0..m)
        .map(|j| (j, poly.value(ProbabilityVector::delta(m, j).as_slice())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if best_vertex.1 < fx {
        return Ok(ProbabilityVector::delta(m, best_vertex.0));
    }
    Ok(ProbabilityVector::from_projection(&x))
}
