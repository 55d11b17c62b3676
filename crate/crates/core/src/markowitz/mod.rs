//! Long-only mean-variance optimization, efficient frontier sweeps and the
//! Shannon entropy of portfolio weights.

mod qp;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use qp::QpSolution;

use crate::correlation::{CorrelationLabel, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::panel::format_f64;

const UNIT_DIAGONAL_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;
const REGULARIZATION_THRESHOLD: f64 = 1e-8;
const REGULARIZATION: f64 = 1e-8;

/// Means, volatilities and correlation of `N` assets.
#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    corr: CorrelationMatrix,
    /// `sigma_i sigma_j C_ij`, with `C` regularized when near-singular.
    covariance: DMatrix<f64>,
    regularized: bool,
}

impl PortfolioProblem {
    /// Requires `sigma_i > 0`, a unit diagonal and `min eig(C) >= -1e-8`.
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, corr: CorrelationMatrix) -> Result<Self> {
        for i in 0..corr.n() {
            if (corr.get(i, i) - 1.0).abs() > UNIT_DIAGONAL_TOL {
                return Err(Error::Domain(format!(
                    "correlation diagonal entry {i} is {}, expected 1",
                    corr.get(i, i)
                )));
            }
        }
        Self::build(mu, sigma, corr)
    }

    /// Like [`PortfolioProblem::new`] but accepts any symmetric positive
    /// semidefinite matrix, e.g. a spectral component whose diagonal has not
    /// been restored.
    pub fn with_unrepaired_diagonal(
        mu: Vec<f64>,
        sigma: Vec<f64>,
        corr: CorrelationMatrix,
    ) -> Result<Self> {
        Self::build(mu, sigma, corr)
    }

    fn build(mu: Vec<f64>, sigma: Vec<f64>, corr: CorrelationMatrix) -> Result<Self> {
        let n = corr.n();
        if mu.len() != n || sigma.len() != n {
            return Err(Error::Shape(format!(
                "{} means and {} volatilities for {n} assets",
                mu.len(),
                sigma.len()
            )));
        }
        if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Domain(format!(
                "volatility of asset {i} must be positive, got {}",
                sigma[i]
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("mean returns must be finite".into()));
        }
        let min_eig = corr
            .entries()
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::Domain(format!(
                "correlation matrix is not positive semidefinite (min eigenvalue {min_eig})"
            )));
        }
        let regularized = min_eig < REGULARIZATION_THRESHOLD;
        if regularized {
            log::info!(
                "correlation ({}) has min eigenvalue {min_eig:.3e}; adding {REGULARIZATION:e} to the diagonal",
                corr.label().as_str()
            );
        }
        let covariance = DMatrix::from_fn(n, n, |i, j| {
            let c = corr.get(i, j) + if regularized && i == j { REGULARIZATION } else { 0.0 };
            sigma[i] * sigma[j] * c
        });
        Ok(Self {
            mu,
            sigma,
            corr,
            covariance,
            regularized,
        })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn corr(&self) -> &CorrelationMatrix {
        &self.corr
    }

    pub fn is_regularized(&self) -> bool {
        self.regularized
    }

    /// `[min mu, max mu]`, the attainable returns of long-only portfolios.
    pub fn return_range(&self) -> (f64, f64) {
        let lo = self.mu.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

const BUDGET_TOL: f64 = 1e-10;

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("weight vector is empty".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain(format!(
                "weight {i} is {}, short positions are not allowed",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > BUDGET_TOL {
            return Err(Error::Domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_len(p: &PortfolioProblem, w: &WeightVector) -> Result<()> {
    if w.len() != p.n() {
        return Err(Error::Shape(format!(
            "{} weights for {} assets",
            w.len(),
            p.n()
        )));
    }
    Ok(())
}

/// `sum_ij w_i w_j C_ij sigma_i sigma_j` on the unregularized correlation.
/// Rounding-level negatives are clamped to zero.
pub fn portfolio_variance(p: &PortfolioProblem, w: &WeightVector) -> Result<f64> {
    check_len(p, w)?;
    let w = w.as_slice();
    let n = p.n();
    let mut total = 0.0;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += w[j] * p.corr.get(i, j) * p.sigma[j];
        }
        total += w[i] * p.sigma[i] * row;
    }
    Ok(if total < 0.0 && total > -1e-12 { 0.0 } else { total })
}

pub fn portfolio_return(p: &PortfolioProblem, w: &WeightVector) -> Result<f64> {
    check_len(p, w)?;
    Ok(w.as_slice().iter().zip(&p.mu).map(|(a, b)| a * b).sum())
}

/// Full solver output including constraint multipliers.
pub fn solve_min_variance(p: &PortfolioProblem, target_mu: f64) -> Result<QpSolution> {
    let (lo, hi) = p.return_range();
    let slack = 1e-12 * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if !(target_mu >= lo - slack && target_mu <= hi + slack) {
        return Err(Error::InfeasibleTarget {
            target: target_mu,
            min: lo,
            max: hi,
        });
    }
    qp::solve(&p.covariance, &p.mu, target_mu.clamp(lo, hi))
}

/// Minimum-variance long-only weights with `mu' w = target_mu`.
pub fn min_variance_weights(p: &PortfolioProblem, target_mu: f64) -> Result<WeightVector> {
    let sol = solve_min_variance(p, target_mu)?;
    WeightVector::new(sol.weights)
}

/// Shannon entropy in nats; zero weights contribute nothing.
pub fn weight_entropy(w: &WeightVector) -> f64 {
    entropy(w.as_slice())
}

pub(crate) fn entropy(w: &[f64]) -> f64 {
    w.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum::<f64>()
        .max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub target_mu: f64,
    pub achieved_sigma: f64,
    pub weights: WeightVector,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    /// Ordered by `target_mu`, strictly increasing.
    pub points: Vec<FrontierPoint>,
    pub problem_label: CorrelationLabel,
}

impl Frontier {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the lowest-risk point (first one on ties).
    pub fn min_variance_index(&self) -> usize {
        self.points
            .iter()
            .enumerate()
            .fold(0, |best, (k, p)| {
                if p.achieved_sigma < self.points[best].achieved_sigma {
                    k
                } else {
                    best
                }
            })
    }

    /// Points at or above the minimum-variance return.
    pub fn upper_branch(&self) -> &[FrontierPoint] {
        &self.points[self.min_variance_index()..]
    }

    /// `target_mu,achieved_sigma,entropy` followed by one column per asset
    /// unless `compact`.
    pub fn write_csv<W: Write>(&self, writer: W, assets: &[String], compact: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
        let mut header = vec!["target_mu".to_string(), "achieved_sigma".into(), "entropy".into()];
        if !compact {
            header.extend(assets.iter().map(|a| format!("w_{a}")));
        }
        w.write_record(&header).map_err(csv_err)?;
        for p in &self.points {
            let mut rec = vec![
                format_f64(p.target_mu),
                format_f64(p.achieved_sigma),
                format_f64(p.entropy),
            ];
            if !compact {
                rec.extend(p.weights.as_slice().iter().map(|x| format_f64(*x)));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

fn frontier_point(p: &PortfolioProblem, target_mu: f64) -> Result<FrontierPoint> {
    let weights = min_variance_weights(p, target_mu)?;
    let achieved_sigma = portfolio_variance(p, &weights)?.max(0.0).sqrt();
    let entropy = weight_entropy(&weights);
    Ok(FrontierPoint {
        target_mu,
        achieved_sigma,
        weights,
        entropy,
    })
}

/// `n_points` targets evenly spaced on `[min mu + eps, max mu - eps]` with
/// `eps = 1e-9 * range`. A problem with a single attainable return gives a
/// one-point frontier.
pub fn efficient_frontier(p: &PortfolioProblem, n_points: usize) -> Result<Frontier> {
    if n_points < 2 {
        return Err(Error::Domain(format!(
            "frontier needs at least 2 points, got {n_points}"
        )));
    }
    let (lo, hi) = p.return_range();
    let range = hi - lo;
    let targets: Vec<f64> = if p.n() == 1 || range <= 0.0 {
        vec![lo]
    } else {
        let eps = 1e-9 * range;
        let (a, b) = (lo + eps, hi - eps);
        (0..n_points)
            .map(|k| a + (b - a) * k as f64 / (n_points - 1) as f64)
            .collect()
    };
    let points = targets
        .par_iter()
        .map(|&t| frontier_point(p, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Frontier {
        points,
        problem_label: p.corr.label(),
    })
}
