//! Equal-time correlation matrices and summaries of their off-diagonal
//! entries.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::{self, format_f64, PanelOrigin, ReturnPanel};

/// What a correlation matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrelationLabel {
    Original,
    RandomSynthetic,
    Filtered,
    RandomBand,
    LargestMode,
}

impl CorrelationLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationLabel::Original => "original",
            CorrelationLabel::RandomSynthetic => "random_synthetic",
            CorrelationLabel::Filtered => "filtered",
            CorrelationLabel::RandomBand => "random_band",
            CorrelationLabel::LargestMode => "largest_mode",
        }
    }

    /// Labels produced directly from data carry the full correlation
    /// invariants; spectral components only need to be symmetric.
    pub fn is_empirical(self) -> bool {
        matches!(
            self,
            CorrelationLabel::Original | CorrelationLabel::RandomSynthetic
        )
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    label: CorrelationLabel,
    assets: Vec<String>,
}

impl CorrelationMatrix {
    /// Validates symmetry, plus unit diagonal and `[-1, 1]` range for
    /// empirical labels.
    pub fn new(
        entries: DMatrix<f64>,
        label: CorrelationLabel,
        assets: Vec<String>,
    ) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::Shape(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if assets.len() != n {
            return Err(Error::Shape(format!(
                "{} asset identifiers for a {n}x{n} matrix",
                assets.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("correlation entries must be finite".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Domain(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if label.is_empirical() {
            for i in 0..n {
                if (entries[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                    return Err(Error::Domain(format!(
                        "diagonal entry {i} is {}, expected 1",
                        entries[(i, i)]
                    )));
                }
            }
            if entries.iter().any(|x| x.abs() > 1.0 + SYMMETRY_TOL) {
                return Err(Error::Domain("correlation entries must lie in [-1, 1]".into()));
            }
        }
        Ok(Self {
            entries,
            label,
            assets,
        })
    }

    pub(crate) fn from_parts(
        entries: DMatrix<f64>,
        label: CorrelationLabel,
        assets: Vec<String>,
    ) -> Self {
        debug_assert_eq!(entries.nrows(), assets.len());
        Self {
            entries,
            label,
            assets,
        }
    }

    /// Matrix with generated asset identifiers.
    pub fn from_entries(entries: DMatrix<f64>, label: CorrelationLabel) -> Result<Self> {
        let n = entries.nrows();
        Self::new(entries, label, panel::asset_ids(n))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn label(&self) -> CorrelationLabel {
        self.label
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn with_label(mut self, label: CorrelationLabel) -> Self {
        self.label = label;
        self
    }

    /// Upper-triangle entries in row order.
    pub fn offdiag_values(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    /// `N x N` CSV with a header of asset identifiers.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
        w.write_record(std::iter::once("asset").chain(self.assets.iter().map(String::as_str)))
            .map_err(csv_err)?;
        for i in 0..self.n() {
            let mut rec = vec![self.assets[i].clone()];
            rec.extend((0..self.n()).map(|j| format_f64(self.entries[(i, j)])));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

/// `C = G G^T / L` on the standardized panel.
pub fn correlation(r: &ReturnPanel) -> Result<CorrelationMatrix> {
    let standardized;
    let g = if r.is_standardized() {
        r
    } else {
        standardized = panel::standardize(r)?;
        &standardized
    };
    let n = g.n_assets();
    let l = g.len() as f64;
    let gram = g.returns() * g.returns().transpose();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in i + 1..n {
            let v = (gram[(i, j)] / l).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let label = match r.origin() {
        PanelOrigin::SyntheticIid => CorrelationLabel::RandomSynthetic,
        _ => CorrelationLabel::Original,
    };
    Ok(CorrelationMatrix::from_parts(c, label, g.assets().to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffDiagonalStats {
    pub mean: f64,
    pub sd: f64,
    /// Standardized third central moment, population form. Zero when `sd` is 0.
    pub skewness: f64,
    pub count: usize,
}

pub fn offdiag_stats(c: &CorrelationMatrix) -> Result<OffDiagonalStats> {
    if c.n() < 2 {
        return Err(Error::Shape("off-diagonal statistics need n >= 2".into()));
    }
    let values = c.offdiag_values();
    Ok(moments(&values))
}

fn moments(values: &[f64]) -> OffDiagonalStats {
    let count = values.len();
    let m = values.iter().sum::<f64>() / count as f64;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= count as f64;
    m3 /= count as f64;
    let sd = m2.sqrt();
    // Spread below rounding noise counts as a constant sample.
    let skewness = if sd <= 1e-12 * m.abs().max(1.0) {
        0.0
    } else {
        m3 / (sd * sd * sd)
    };
    OffDiagonalStats {
        mean: m,
        sd,
        skewness,
        count,
    }
}

/// Density-normalized histogram over equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// Values below the range go to the first bin and values above it to
    /// the last, so the total mass is always 1.
    pub fn from_values(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = range;
        if bins == 0 {
            return Err(Error::Domain("histogram needs at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("invalid histogram range [{lo}, {hi}]")));
        }
        if values.is_empty() {
            return Err(Error::InsufficientPoints {
                found: 0,
                required: 1,
            });
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            let k = ((v - lo) / width).floor();
            let k = if k.is_nan() || k < 0.0 {
                0
            } else {
                (k as usize).min(bins - 1)
            };
            counts[k] += 1;
        }
        let total = values.len() as f64;
        let densities = counts.iter().map(|&c| c as f64 / (total * width)).collect();
        Ok(Self { edges, densities })
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| e[1] - e[0]).collect()
    }

    /// `sum(density * width)`; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.widths())
            .map(|(d, w)| d * w)
            .sum()
    }

    /// Mean of the binned distribution, using bin centers.
    pub fn mean(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.widths())
            .zip(self.centers())
            .map(|((d, w), c)| d * w * c)
            .sum()
    }
}

pub fn offdiag_histogram(
    c: &CorrelationMatrix,
    bins: usize,
    range: (f64, f64),
) -> Result<Histogram> {
    Histogram::from_values(&c.offdiag_values(), bins, range)
}

/// Mean off-diagonal correlation per rolling window, keyed by the
/// window's first timestamp.
pub fn rolling_mean_correlation(
    r: &ReturnPanel,
    length: usize,
    step: usize,
) -> Result<Vec<(String, f64)>> {
    if r.n_assets() < 2 {
        return Err(Error::Shape("rolling correlation needs at least 2 assets".into()));
    }
    let starts = panel::window_starts(r.len(), length, step)?;
    starts
        .par_iter()
        .map(|&start| {
            let window = panel::standardize(&r.slice(start, length)?)?;
            let c = correlation(&window)?;
            Ok((r.times()[start].clone(), offdiag_stats(&c)?.mean))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::synth_iid;

    fn two_rows(a: &[f64], b: &[f64]) -> ReturnPanel {
        let mut data = a.to_vec();
        data.extend_from_slice(b);
        ReturnPanel::from_row_major(2, a.len(), &data).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let x = [0.3, -1.2, 0.8, 2.0, -0.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let c = correlation(&two_rows(&x, &x)).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-12);
        let c = correlation(&two_rows(&x, &neg)).unwrap();
        assert!((c.get(0, 1) + 1.0).abs() < 1e-12);
        let c = correlation(&two_rows(&[1.0, -1.0, 1.0, -1.0], &[1.0, 1.0, -1.0, -1.0])).unwrap();
        assert!(c.get(0, 1).abs() < 1e-15);
        assert_eq!(c.label(), CorrelationLabel::Original);
    }

    #[test]
    fn iid_panels_are_labelled_random() {
        let c = correlation(&synth_iid(5, 50, 1).unwrap()).unwrap();
        assert_eq!(c.label(), CorrelationLabel::RandomSynthetic);
    }

    #[test]
    fn constant_row_propagates_degenerate() {
        let r = two_rows(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert!(matches!(correlation(&r), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn new_validates_invariants() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(CorrelationMatrix::from_entries(asym, CorrelationLabel::Filtered).is_err());
        let off_diag = DMatrix::from_row_slice(2, 2, &[0.7, 0.5, 0.5, 0.7]);
        assert!(
            CorrelationMatrix::from_entries(off_diag.clone(), CorrelationLabel::Original).is_err()
        );
        assert!(CorrelationMatrix::from_entries(off_diag, CorrelationLabel::Filtered).is_ok());
    }

    fn matrix_with_offdiag(n: usize, values: &[f64]) -> CorrelationMatrix {
        let mut m = DMatrix::identity(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[(i, j)] = values[k];
                m[(j, i)] = values[k];
                k += 1;
            }
        }
        CorrelationMatrix::from_entries(m, CorrelationLabel::Original).unwrap()
    }

    #[test]
    fn stats_examples() {
        let s = offdiag_stats(&matrix_with_offdiag(3, &[0.3, 0.3, 0.3])).unwrap();
        assert!((s.mean - 0.3).abs() < 1e-15);
        assert!(s.sd < 1e-15);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.count, 3);

        let s = offdiag_stats(&matrix_with_offdiag(3, &[-0.4, 0.0, 0.4])).unwrap();
        assert!(s.skewness.abs() < 1e-12);

        // mean 0.3; deviations (-0.2, -0.2, 0.4); m2 = 0.08, m3 = 0.016;
        // skew = 0.016 / 0.08^1.5 = 1/sqrt(2).
        let s = offdiag_stats(&matrix_with_offdiag(3, &[0.1, 0.1, 0.7])).unwrap();
        assert!((s.mean - 0.3).abs() < 1e-12);
        assert!((s.skewness - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn histogram_examples() {
        let c = matrix_with_offdiag(2, &[0.25]);
        let h = offdiag_histogram(&c, 1, (0.0, 0.5)).unwrap();
        assert!((h.densities[0] - 2.0).abs() < 1e-12);

        let h = Histogram::from_values(&[-3.0, 0.5, 7.0], 4, (0.0, 1.0)).unwrap();
        // -3 clamps into bin 0, 7 into bin 3.
        assert!((h.densities[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((h.densities[2] - 4.0 / 3.0).abs() < 1e-12);
        assert!((h.densities[3] - 4.0 / 3.0).abs() < 1e-12);
        assert!((h.total_mass() - 1.0).abs() < 1e-12);

        assert!(Histogram::from_values(&[0.1], 0, (0.0, 1.0)).is_err());
        assert!(Histogram::from_values(&[0.1], 3, (1.0, 1.0)).is_err());
    }

    #[test]
    fn iid_histogram_is_centered() {
        // 142 assets give 10011 pairs; q = 4.
        let r = synth_iid(142, 568, 2024).unwrap();
        let c = correlation(&r).unwrap();
        let h = offdiag_histogram(&c, 50, (-1.0, 1.0)).unwrap();
        assert!(h.mean().abs() < 0.01, "{}", h.mean());
    }

    #[test]
    fn rolling_single_window_matches_full_stats() {
        let r = synth_iid(6, 40, 3).unwrap();
        let roll = rolling_mean_correlation(&r, 40, 5).unwrap();
        assert_eq!(roll.len(), 1);
        let full = offdiag_stats(&correlation(&r).unwrap()).unwrap();
        assert!((roll[0].1 - full.mean).abs() < 1e-12);
        assert_eq!(roll[0].0, r.times()[0]);
    }

    #[test]
    fn rolling_iid_means_near_zero() {
        let r = synth_iid(20, 600, 8).unwrap();
        let roll = rolling_mean_correlation(&r, 250, 21).unwrap();
        assert_eq!(roll.len(), (600 - 250) / 21 + 1);
        // Each window mean has sd about 1/sqrt(pairs * length).
        let bound = 4.0 / ((20.0 * 19.0 / 2.0) * 250.0_f64).sqrt();
        for (_, m) in &roll {
            assert!(m.abs() < bound, "{m} vs {bound}");
        }
    }

    #[test]
    fn rolling_perfect_factor_gives_one() {
        let (r, _) = crate::panel::synth_one_factor(5, 300, (1.0, 1.0), 1e-9, 4).unwrap();
        for (_, m) in rolling_mean_correlation(&r, 250, 21).unwrap() {
            assert!((m - 1.0).abs() < 1e-9);
        }
    }
}
