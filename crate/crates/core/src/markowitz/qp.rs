//! Primal active-set solver for the long-only minimum-variance problem
//!
//! ```text
//!     minimize   1/2 w' S w
//!     subject to mu' w = target,  1' w = 1,  w >= 0
//! ```
//!
//! with `S` positive definite. The working set holds the variables fixed at
//! zero; the remaining (free) block is solved in range-space form
//! `w_F = H^-1 A' nu`, `(A H^-1 A') nu = b`, using a pseudo-inverse for the
//! 2x2 Schur complement so that a free set with equal returns (rank-one
//! `A`) is handled without special cases.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub weights: Vec<f64>,
    /// Multipliers of the return and budget constraints: on the support,
    /// `(S w)_i = nu[0] mu_i + nu[1]`.
    pub nu: [f64; 2],
    pub iterations: usize,
}

const STEP_TOL: f64 = 1e-13;

fn starting_point(mu: &[f64], target: f64) -> (Vec<f64>, Vec<usize>) {
    let n = mu.len();
    let mut below: Option<usize> = None;
    let mut above: Option<usize> = None;
    for i in 0..n {
        if mu[i] <= target && below.is_none_or(|b| mu[i] > mu[b]) {
            below = Some(i);
        }
        if mu[i] >= target && above.is_none_or(|a| mu[i] < mu[a]) {
            above = Some(i);
        }
    }
    let (lo, hi) = (below.unwrap(), above.unwrap());
    let mut w = vec![0.0; n];
    if lo == hi || mu[hi] == mu[lo] {
        w[lo] = 1.0;
        return (w, vec![lo]);
    }
    let theta = ((target - mu[lo]) / (mu[hi] - mu[lo])).clamp(0.0, 1.0);
    w[lo] = 1.0 - theta;
    w[hi] = theta;
    (w, vec![lo, hi])
}

/// Symmetric 2x2 pseudo-inverse applied to `b`.
fn pinv2_solve(s: &Matrix2<f64>, b: &Vector2<f64>) -> Vector2<f64> {
    let eig = s.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let mut out = Vector2::zeros();
    for k in 0..2 {
        let l = eig.eigenvalues[k];
        if l > 1e-13 * scale {
            let v = eig.eigenvectors.column(k);
            out += v * (v.dot(b) / l);
        }
    }
    out
}

struct Subproblem {
    x: DVector<f64>,
    nu: Vector2<f64>,
}

fn solve_free_block(cov: &DMatrix<f64>, mu: &[f64], free: &[usize], target: f64) -> Result<Subproblem> {
    let k = free.len();
    let h = DMatrix::from_fn(k, k, |a, b| cov[(free[a], free[b])]);
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("covariance block not positive definite".into()))?;
    let at = DMatrix::from_fn(k, 2, |a, c| if c == 0 { mu[free[a]] } else { 1.0 });
    let hinv_at = chol.solve(&at);
    let s = at.transpose() * &hinv_at;
    let s = Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
    let nu = pinv2_solve(&s, &Vector2::new(target, 1.0));
    let x = &hinv_at * DVector::from_column_slice(nu.as_slice());
    Ok(Subproblem { x, nu })
}

pub fn solve(cov: &DMatrix<f64>, mu: &[f64], target: f64) -> Result<QpSolution> {
    let n = mu.len();
    let (mut w, mut free) = starting_point(mu, target);
    let grad_scale = (0..n).map(|i| cov[(i, i)]).fold(0.0_f64, f64::max);
    let multiplier_tol = 1e-11 * grad_scale.max(f64::MIN_POSITIVE);
    let max_iterations = 20 * n + 100;

    for iteration in 0..max_iterations {
        let sub = solve_free_block(cov, mu, &free, target)?;
        let step: Vec<f64> = free
            .iter()
            .enumerate()
            .map(|(a, &i)| sub.x[a] - w[i])
            .collect();
        let step_norm = step.iter().fold(0.0_f64, |m, p| m.max(p.abs()));

        if step_norm <= STEP_TOL {
            for (a, &i) in free.iter().enumerate() {
                w[i] = sub.x[a];
            }
            // Bound multipliers lambda_i = (S w)_i - nu0 mu_i - nu1 off the free set.
            let mut entering: Option<(usize, f64)> = None;
            for i in 0..n {
                if free.contains(&i) {
                    continue;
                }
                let g: f64 = free.iter().map(|&j| cov[(i, j)] * w[j]).sum();
                let lambda = g - sub.nu[0] * mu[i] - sub.nu[1];
                if lambda < -multiplier_tol && entering.is_none_or(|(_, best)| lambda < best) {
                    entering = Some((i, lambda));
                }
            }
            match entering {
                Some((i, _)) => {
                    free.push(i);
                    free.sort_unstable();
                }
                None => {
                    return Ok(finish(w, [sub.nu[0], sub.nu[1]], iteration + 1));
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for (a, &i) in free.iter().enumerate() {
            if step[a] < 0.0 {
                let ratio = -w[i] / step[a];
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            w[i] += alpha * step[a];
        }
        if let Some(j) = blocking {
            w[j] = 0.0;
            free.retain(|&i| i != j);
        }
    }
    Err(Error::NumericalFailure(format!(
        "active-set solver did not converge in {max_iterations} iterations"
    )))
}

fn finish(mut w: Vec<f64>, nu: [f64; 2], iterations: usize) -> QpSolution {
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    QpSolution {
        weights: w,
        nu,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_asset_target_is_unique_mix() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let sol = solve(&cov, &[0.1, 0.2], 0.125).unwrap();
        assert!((sol.weights[0] - 0.75).abs() < 1e-12);
        assert!((sol.weights[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn equal_returns_reach_global_minimum() {
        // Equal returns: the budget is the only binding equality.
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 4.0]);
        let sol = solve(&cov, &[0.5, 0.5, 0.5], 0.5).unwrap();
        let ones = DVector::from_element(3, 1.0);
        let x = cov.clone().cholesky().unwrap().solve(&ones);
        let expected = &x / x.sum();
        for i in 0..3 {
            assert!((sol.weights[i] - expected[i]).abs() < 1e-12);
        }
    }
}
