//! Eigenportfolio series and their one-factor regression on a market index.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::{self, format_f64, MarketSeries, ReturnPanel};
use crate::rmt::SpectralDecomposition;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub residual_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionOptions {
    /// Standardize both series before fitting, making `beta` their
    /// correlation and `alpha` zero.
    pub standardize: bool,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self { standardize: true }
    }
}

/// `R(t) = sum_i v_i r_i(t)` on the standardized panel.
pub fn eigenportfolio_series(r: &ReturnPanel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != r.n_assets() {
        return Err(Error::Shape(format!(
            "weight vector has {} entries, panel has {} assets",
            v.len(),
            r.n_assets()
        )));
    }
    let standardized;
    let g = if r.is_standardized() {
        r
    } else {
        standardized = panel::standardize(r)?;
        &standardized
    };
    let m = g.returns();
    Ok((0..g.len())
        .map(|t| v.iter().enumerate().map(|(i, w)| w * m[(i, t)]).sum())
        .collect())
}

/// Ordinary least squares of `series` on the market, standardizing both.
pub fn ols_beta(series: &[f64], market: &MarketSeries) -> Result<RegressionResult> {
    ols_beta_with(series, market, RegressionOptions::default())
}

pub fn ols_beta_with(
    series: &[f64],
    market: &MarketSeries,
    options: RegressionOptions,
) -> Result<RegressionResult> {
    let (y, x) = regression_inputs(series, market, options)?;
    Ok(fit(&y, &x))
}

/// Residuals `y - alpha - beta x` on the (optionally standardized) inputs.
pub fn residuals(
    series: &[f64],
    market: &MarketSeries,
    options: RegressionOptions,
) -> Result<Vec<f64>> {
    let (y, x) = regression_inputs(series, market, options)?;
    let fitted = fit(&y, &x);
    Ok(y.iter()
        .zip(&x)
        .map(|(yi, xi)| yi - fitted.alpha - fitted.beta * xi)
        .collect())
}

fn regression_inputs(
    series: &[f64],
    market: &MarketSeries,
    options: RegressionOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.len() != market.len() {
        return Err(Error::Shape(format!(
            "series has {} observations, market has {}",
            series.len(),
            market.len()
        )));
    }
    if series.len() < 3 {
        return Err(Error::Shape("regression needs at least 3 observations".into()));
    }
    let x = market.values();
    let x_sd = stats::pop_sd(x);
    if stats::is_degenerate(x, x_sd) {
        return Err(Error::DegenerateSeries("market series is constant".into()));
    }
    if !options.standardize {
        return Ok((series.to_vec(), x.to_vec()));
    }
    let x = market.standardize()?.values().to_vec();
    // A constant dependent series cannot be rescaled; it is only centered.
    let y = stats::standardized(series).unwrap_or_else(|| {
        let m = stats::mean(series);
        series.iter().map(|v| v - m).collect()
    });
    Ok((y, x))
}

fn fit(y: &[f64], x: &[f64]) -> RegressionResult {
    let var_x = stats::pop_variance(x);
    let var_y = stats::pop_variance(y);
    let cov = stats::covariance(y, x);
    let beta = cov / var_x;
    let alpha = stats::mean(y) - beta * stats::mean(x);
    let r_squared = if var_y > 0.0 {
        (cov * cov / (var_x * var_y)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let resid: Vec<f64> = y
        .iter()
        .zip(x)
        .map(|(yi, xi)| yi - alpha - beta * xi)
        .collect();
    RegressionResult {
        alpha,
        beta,
        r_squared,
        residual_sd: stats::pop_sd(&resid),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaEntry {
    /// 0-based eigenvalue index, ascending order.
    pub index: usize,
    pub eigenvalue: f64,
    pub regression: RegressionResult,
}

/// One regression per eigenvector, in eigenvalue order.
pub fn beta_profile(
    r: &ReturnPanel,
    d: &SpectralDecomposition,
    market: &MarketSeries,
) -> Result<Vec<BetaEntry>> {
    beta_profile_with(r, d, market, RegressionOptions::default())
}

pub fn beta_profile_with(
    r: &ReturnPanel,
    d: &SpectralDecomposition,
    market: &MarketSeries,
    options: RegressionOptions,
) -> Result<Vec<BetaEntry>> {
    if d.n() != r.n_assets() {
        return Err(Error::Shape(format!(
            "decomposition is {}-dimensional, panel has {} assets",
            d.n(),
            r.n_assets()
        )));
    }
    let g = panel::standardize(r)?;
    (0..d.n())
        .into_par_iter()
        .map(|k| {
            let v: Vec<f64> = d.eigenvector(k).iter().copied().collect();
            let series = eigenportfolio_series(&g, &v)?;
            Ok(BetaEntry {
                index: k,
                eigenvalue: d.eigenvalues()[k],
                regression: ols_beta_with(&series, market, options)?,
            })
        })
        .collect()
}

/// `index,eigenvalue,alpha,beta,r_squared,residual_sd` with 1-based indices.
pub fn write_beta_profile_csv<W: Write>(writer: W, profile: &[BetaEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
    w.write_record(["index", "eigenvalue", "alpha", "beta", "r_squared", "residual_sd"])
        .map_err(csv_err)?;
    for e in profile {
        let r = &e.regression;
        w.write_record([
            (e.index + 1).to_string(),
            format_f64(e.eigenvalue),
            format_f64(r.alpha),
            format_f64(r.beta),
            format_f64(r.r_squared),
            format_f64(r.residual_sd),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}
