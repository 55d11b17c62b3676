//! Power-law fits of weight entropy against portfolio risk, on a single
//! frontier and across rolling windows.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markowitz::{efficient_frontier, Frontier, FrontierPoint};
use crate::panel::{self, format_f64, ReturnPanel};
use crate::pipeline::{self, CorrVariant};

pub const DEFAULT_ENTROPY_FLOOR: f64 = 1e-12;

/// `ln E = log_intercept - gamma ln sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Points dropped for entropy at or below the floor, or outside the
    /// requested abscissa range.
    pub excluded: usize,
    /// Smallest and largest abscissa used.
    pub sigma_range: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub entropy_floor: f64,
    /// Keep only points with abscissa in this closed interval.
    pub sigma_range: Option<(f64, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            entropy_floor: DEFAULT_ENTROPY_FLOOR,
            sigma_range: None,
        }
    }
}

/// Log-log least squares of `(sigma, entropy)` pairs.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    fit_power_law_with(points, FitOptions::default())
}

pub fn fit_power_law_with(points: &[(f64, f64)], options: FitOptions) -> Result<PowerLawFit> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut excluded = 0;
    for &(sigma, entropy) in points {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!(
                "power-law abscissa must be positive, got {sigma}"
            )));
        }
        let in_range = options
            .sigma_range
            .is_none_or(|(lo, hi)| sigma >= lo && sigma <= hi);
        if !in_range || !(entropy > options.entropy_floor) {
            excluded += 1;
            continue;
        }
        xs.push(sigma.ln());
        ys.push(entropy.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientPoints {
            found: n,
            required: 3,
        });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let x_scale = xs.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    if sxx <= (1e-14 * x_scale).powi(2) * n as f64 {
        return Err(Error::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    // A flat response fitted exactly counts as a perfect fit.
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min).exp();
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(PowerLawFit {
        gamma: -slope,
        log_intercept: intercept,
        r_squared,
        n_points: n,
        excluded,
        sigma_range: (lo, hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    /// From the minimum-variance point upward in return.
    #[default]
    Upper,
    All,
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "upper" => Ok(Branch::Upper),
            "all" => Ok(Branch::All),
            other => Err(format!("unknown fit branch `{other}` (expected upper or all)")),
        }
    }
}

/// A frontier point is a corner portfolio when one asset holds at least
/// `1 - CORNER_TOL` of the weight. The frontier grid stops `1e-9 * range`
/// short of the extreme returns, so its end points sit this close to a
/// corner without being exactly on it.
pub const CORNER_TOL: f64 = 1e-6;

fn is_corner(p: &FrontierPoint) -> bool {
    p.weights.as_slice().iter().any(|&w| w >= 1.0 - CORNER_TOL)
}

/// Entropy against achieved risk on one branch of a frontier. Corner
/// portfolios are excluded together with the sub-floor entropies.
pub fn frontier_fit(f: &Frontier, branch: Branch, options: FitOptions) -> Result<PowerLawFit> {
    let points = match branch {
        Branch::Upper => f.upper_branch(),
        Branch::All => &f.points[..],
    };
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| !is_corner(p))
        .map(|p| (p.achieved_sigma, p.entropy))
        .collect();
    let corners = points.len() - pairs.len();
    let mut fit = fit_power_law_with(&pairs, options)?;
    fit.excluded += corners;
    Ok(fit)
}

/// Raw `(target_mu, entropy)` series plus a log-log fit attempt over the
/// points with positive return.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReturn {
    pub series: Vec<(f64, f64)>,
    pub fit: std::result::Result<PowerLawFit, String>,
    /// Points left out of the fit because their return is not positive.
    pub non_positive: usize,
}

pub fn entropy_vs_return(f: &Frontier, options: FitOptions) -> EntropyReturn {
    let series: Vec<(f64, f64)> = f.points.iter().map(|p| (p.target_mu, p.entropy)).collect();
    let non_positive = series.iter().filter(|(mu, _)| *mu <= 0.0).count();
    let positive: Vec<(f64, f64)> = f
        .points
        .iter()
        .filter(|p| p.target_mu > 0.0 && !is_corner(p))
        .map(|p| (p.target_mu, p.entropy))
        .collect();
    let fit = fit_power_law_with(&positive, options).map_err(|e| e.status());
    EntropyReturn {
        series,
        fit,
        non_positive,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub window_length: usize,
    pub step: usize,
    pub corr_variant: CorrVariant,
    pub diagonal_repair: bool,
    pub frontier_points: usize,
    pub branch: Branch,
    pub fit: FitOptions,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            window_length: 500,
            step: 20,
            corr_variant: CorrVariant::Original,
            diagonal_repair: true,
            frontier_points: 100,
            branch: Branch::Upper,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEntry {
    pub window_start: String,
    /// Failure message when this window could not be fitted.
    pub fit: std::result::Result<PowerLawFit, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSeries {
    pub entries: Vec<ExponentEntry>,
    pub window_length: usize,
    pub step: usize,
}

impl ExponentSeries {
    /// `window_start,gamma,r_squared,n_points,status`; failed windows have
    /// empty numeric cells and the error in `status`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
        w.write_record(["window_start", "gamma", "r_squared", "n_points", "status"])
            .map_err(csv_err)?;
        for e in &self.entries {
            let rec = match &e.fit {
                Ok(f) => [
                    e.window_start.clone(),
                    format_f64(f.gamma),
                    format_f64(f.r_squared),
                    f.n_points.to_string(),
                    "ok".to_string(),
                ],
                Err(msg) => [
                    e.window_start.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    msg.clone(),
                ],
            };
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

fn window_fit(window: &ReturnPanel, config: &ScanConfig) -> Result<PowerLawFit> {
    let problem = pipeline::problem_from_panel(window, config.corr_variant, config.diagonal_repair)?;
    let frontier = efficient_frontier(&problem, config.frontier_points)?;
    frontier_fit(&frontier, config.branch, config.fit)
}

/// Frontier exponent per rolling window. Each window uses its own means,
/// volatilities and correlation; a failing window is recorded, not fatal.
pub fn rolling_exponents(r: &ReturnPanel, config: &ScanConfig) -> Result<ExponentSeries> {
    let starts = panel::window_starts(r.len(), config.window_length, config.step)?;
    let entries = starts
        .par_iter()
        .map(|&start| {
            let fit = r
                .slice(start, config.window_length)
                .and_then(|w| window_fit(&w, config))
                .map_err(|e| e.status());
            ExponentEntry {
                window_start: r.times()[start].clone(),
                fit,
            }
        })
        .collect();
    Ok(ExponentSeries {
        entries,
        window_length: config.window_length,
        step: config.step,
    })
}

/// Full-sample fit with the same settings as one scan window.
pub fn full_sample_fit(r: &ReturnPanel, config: &ScanConfig) -> Result<PowerLawFit> {
    window_fit(r, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(c: f64, gamma: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let s = 0.01 * (1.0 + k as f64 * 0.37);
                (s, c * s.powf(-gamma))
            })
            .collect()
    }

    #[test]
    fn recovers_planted_exponent() {
        let fit = fit_power_law(&planted(3.0, 2.92, 50)).unwrap();
        assert!((fit.gamma - 2.92).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.log_intercept - 3f64.ln()).abs() < 1e-9);
        assert_eq!(fit.n_points, 50);
    }

    #[test]
    fn flat_and_rising_data() {
        let flat: Vec<(f64, f64)> = (1..10).map(|k| (k as f64, 0.7)).collect();
        let fit = fit_power_law(&flat).unwrap();
        assert!(fit.gamma.abs() < 1e-12);
        let rising: Vec<(f64, f64)> = (1..10).map(|k| (k as f64, k as f64)).collect();
        assert!((fit_power_law(&rising).unwrap().gamma + 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0), (2.0, 0.5)]),
            Err(Error::InsufficientPoints { found: 2, .. })
        ));
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0), (1.0, 0.5), (1.0, 0.2)]),
            Err(Error::DegenerateAbscissa)
        ));
        // Zero-entropy corner points are excluded and counted.
        let pts = [(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.25)];
        let fit = fit_power_law(&pts).unwrap();
        assert_eq!((fit.n_points, fit.excluded), (3, 1));
        assert!(fit_power_law(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn sigma_range_filter() {
        let pts = planted(1.0, 2.0, 30);
        let options = FitOptions {
            sigma_range: Some((0.02, 0.05)),
            ..FitOptions::default()
        };
        let fit = fit_power_law_with(&pts, options).unwrap();
        assert!(fit.sigma_range.0 >= 0.02 && fit.sigma_range.1 <= 0.05);
        assert_eq!(fit.n_points + fit.excluded, 30);
        assert!((fit.gamma - 2.0).abs() < 1e-9);
    }

    #[test]
    fn corner_points_left_out_of_frontier_fit() {
        let (r, _) = crate::panel::synth_one_factor(20, 400, (0.5, 1.5), 1.0, 8).unwrap();
        let p = pipeline::problem_from_panel(&r, CorrVariant::Original, true).unwrap();
        let f = efficient_frontier(&p, 40).unwrap();
        let corners = f.upper_branch().iter().filter(|p| is_corner(p)).count();
        assert!(corners >= 1);
        let fit = frontier_fit(&f, Branch::Upper, FitOptions::default()).unwrap();
        assert_eq!(fit.n_points + fit.excluded, f.upper_branch().len());
        assert!(fit.excluded >= corners);
    }

    #[test]
    fn rolling_entry_count_and_full_window() {
        let (r, _) = crate::panel::synth_one_factor(12, 230, (0.5, 1.5), 1.0, 2).unwrap();
        let config = ScanConfig {
            window_length: 100,
            step: 13,
            frontier_points: 30,
            ..ScanConfig::default()
        };
        let series = rolling_exponents(&r, &config).unwrap();
        assert_eq!(series.entries.len(), (230 - 100) / 13 + 1);
        assert_eq!(series.entries[1].window_start, r.times()[13]);

        let whole = ScanConfig {
            window_length: 230,
            ..config
        };
        let series = rolling_exponents(&r, &whole).unwrap();
        assert_eq!(series.entries.len(), 1);
        let full = full_sample_fit(&r, &whole).unwrap();
        assert_eq!(series.entries[0].fit.as_ref().unwrap(), &full);
    }

    #[test]
    fn stationary_fixture_exponents_are_stable() {
        let (r, _) = crate::panel::synth_one_factor(40, 1500, (0.5, 1.5), 1.0, 17).unwrap();
        let series = rolling_exponents(&r, &ScanConfig::default()).unwrap();
        let gammas: Vec<f64> = series
            .entries
            .iter()
            .filter_map(|e| e.fit.as_ref().ok().map(|f| f.gamma))
            .collect();
        assert_eq!(gammas.len(), series.entries.len());
        let m = crate::stats::mean(&gammas);
        let cv = crate::stats::pop_sd(&gammas) / m;
        assert!(m > 0.0 && cv < 0.5, "mean {m}, cv {cv}");
    }
}
