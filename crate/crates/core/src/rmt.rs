//! Marchenko-Pastur law, symmetric eigendecomposition and the split of a
//! correlation matrix into its random band and the modes above it.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::correlation::{correlation, CorrelationLabel, CorrelationMatrix, Histogram};
use crate::error::{Error, Result};
use crate::panel::{format_f64, synth_iid};

/// Spectral edges of the Marchenko-Pastur law for `q = L / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchenkoPasturLaw {
    pub q: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl MarchenkoPasturLaw {
    /// `P(lambda) = q / (2 pi) * sqrt((l+ - lambda)(lambda - l-)) / lambda` on
    /// the support, 0 elsewhere.
    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= self.lambda_minus || lambda >= self.lambda_plus || lambda <= 0.0 {
            return 0.0;
        }
        let spread = (self.lambda_plus - lambda) * (lambda - self.lambda_minus);
        self.q / std::f64::consts::TAU * spread.sqrt() / lambda
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lambda_minus && lambda <= self.lambda_plus
    }
}

pub fn mp_bounds(q: f64) -> Result<MarchenkoPasturLaw> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    let inv = 1.0 / q;
    let root = 2.0 * inv.sqrt();
    Ok(MarchenkoPasturLaw {
        q,
        lambda_minus: 1.0 + inv - root,
        lambda_plus: 1.0 + inv + root,
    })
}

pub fn mp_density(lambda: f64, q: f64) -> Result<f64> {
    Ok(mp_bounds(q)?.density(lambda))
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
    source_label: CorrelationLabel,
    assets: Vec<String>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn source_label(&self) -> CorrelationLabel {
        self.source_label
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.n()).collect();
        self.project(&all)
    }

    /// `sum_k lambda_k v_k v_k^T` over the given indices, symmetrized.
    fn project(&self, indices: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        let mut scaled = DMatrix::zeros(n, indices.len());
        let mut basis = DMatrix::zeros(n, indices.len());
        for (c, &k) in indices.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            basis.set_column(c, &v);
            scaled.set_column(c, &(v * self.eigenvalues[k]));
        }
        let m = scaled * basis.transpose();
        (&m + m.transpose()) * 0.5
    }

    /// Fraction of eigenvalues inside `[l- - delta, l+ + delta]`.
    pub fn fraction_in_band(&self, law: &MarchenkoPasturLaw, delta: f64) -> f64 {
        let inside = self
            .eigenvalues
            .iter()
            .filter(|&&l| l >= law.lambda_minus - delta && l <= law.lambda_plus + delta)
            .count();
        inside as f64 / self.n() as f64
    }

    /// `index,eigenvalue` with 1-based indices, ascending.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
        w.write_record(["index", "eigenvalue"]).map_err(csv_err)?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            w.write_record([(k + 1).to_string(), format_f64(*l)])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

/// Eigendecomposition with ascending eigenvalues. Each eigenvector is
/// signed so that its largest-magnitude entry (first one on ties) is
/// positive.
pub fn eigendecompose(c: &CorrelationMatrix) -> Result<SpectralDecomposition> {
    let n = c.n();
    let eig = SymmetricEigen::try_new(c.entries().clone(), f64::EPSILON, 1_000_000)
        .ok_or(Error::Convergence(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Convergence(n));
        }
        v /= norm;
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0;
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        eigenvectors.set_column(dst, &v);
        eigenvalues.push(eig.eigenvalues[src]);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        source_label: c.label(),
        assets: c.assets().to_vec(),
    })
}

/// Random band and deviating modes of a decomposed correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RmtPartition {
    pub law: MarchenkoPasturLaw,
    /// Ascending indices with `lambda <= lambda_plus`.
    pub random_indices: Vec<usize>,
    /// Ascending indices with `lambda > lambda_plus`.
    pub deviating_indices: Vec<usize>,
    pub c_random: CorrelationMatrix,
    pub c_filter: CorrelationMatrix,
    pub c_largest: CorrelationMatrix,
}

impl RmtPartition {
    /// True when no eigenvalue exceeds `lambda_plus`; `c_filter` is then zero.
    pub fn filter_is_empty(&self) -> bool {
        self.deviating_indices.is_empty()
    }

    pub fn component(&self, label: CorrelationLabel) -> Option<&CorrelationMatrix> {
        match label {
            CorrelationLabel::RandomBand => Some(&self.c_random),
            CorrelationLabel::Filtered => Some(&self.c_filter),
            CorrelationLabel::LargestMode => Some(&self.c_largest),
            _ => None,
        }
    }
}

/// Eigenvalues below `lambda_minus` stay in the random band; only modes
/// above `lambda_plus` are filtered.
pub fn partition(d: &SpectralDecomposition, law: &MarchenkoPasturLaw) -> RmtPartition {
    let (deviating_indices, random_indices): (Vec<usize>, Vec<usize>) =
        (0..d.n()).partition(|&k| d.eigenvalues[k] > law.lambda_plus);
    let assets = d.assets.clone();
    let c_random = CorrelationMatrix::from_parts(
        d.project(&random_indices),
        CorrelationLabel::RandomBand,
        assets.clone(),
    );
    let c_filter = CorrelationMatrix::from_parts(
        d.project(&deviating_indices),
        CorrelationLabel::Filtered,
        assets.clone(),
    );
    let c_largest = CorrelationMatrix::from_parts(
        d.project(&[d.n() - 1]),
        CorrelationLabel::LargestMode,
        assets,
    );
    RmtPartition {
        law: *law,
        random_indices,
        deviating_indices,
        c_random,
        c_filter,
        c_largest,
    }
}

pub fn ratio_to_bound(d: &SpectralDecomposition, law: &MarchenkoPasturLaw) -> f64 {
    d.max_eigenvalue() / law.lambda_plus
}

/// Largest eigenvalue of an iid Gaussian panel of the same shape; the
/// finite-size counterpart of `lambda_plus`.
pub fn simulated_max_eigenvalue(n: usize, l: usize, seed: u64) -> Result<f64> {
    let c = correlation(&synth_iid(n, l, seed)?)?;
    Ok(eigendecompose(&c)?.max_eigenvalue())
}

const DIAGONAL_TOL: f64 = 1e-10;

/// Replace the diagonal with ones. The increment `1 - c_ii` is nonnegative,
/// so a positive semidefinite input stays positive semidefinite.
pub fn restore_unit_diagonal(c: &CorrelationMatrix) -> Result<CorrelationMatrix> {
    let mut entries = c.entries().clone();
    for i in 0..c.n() {
        let d = entries[(i, i)];
        if d > 1.0 + DIAGONAL_TOL {
            return Err(Error::Domain(format!(
                "diagonal entry {i} is {d}, above 1"
            )));
        }
        entries[(i, i)] = 1.0;
    }
    Ok(CorrelationMatrix::from_parts(
        entries,
        c.label(),
        c.assets().to_vec(),
    ))
}

/// Eigenvalue histogram with the theoretical density at each bin center.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumHistogram {
    pub histogram: Histogram,
    pub mp_density: Vec<f64>,
}

impl SpectrumHistogram {
    /// `bin_left,bin_right,density,mp_density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
        w.write_record(["bin_left", "bin_right", "density", "mp_density"])
            .map_err(csv_err)?;
        let h = &self.histogram;
        for k in 0..h.bins() {
            w.write_record([
                format_f64(h.edges[k]),
                format_f64(h.edges[k + 1]),
                format_f64(h.densities[k]),
                format_f64(self.mp_density[k]),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }
}

/// Bins span the union of the observed spectrum and the theoretical support.
pub fn spectrum_histogram(
    d: &SpectralDecomposition,
    law: &MarchenkoPasturLaw,
    bins: usize,
) -> Result<SpectrumHistogram> {
    let lo = d.eigenvalues[0].min(law.lambda_minus);
    let hi = d.max_eigenvalue().max(law.lambda_plus);
    let histogram = Histogram::from_values(&d.eigenvalues, bins, (lo, hi))?;
    let mp_density = histogram.centers().iter().map(|&x| law.density(x)).collect();
    Ok(SpectrumHistogram {
        histogram,
        mp_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::synth_one_factor;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> CorrelationMatrix {
        CorrelationMatrix::from_entries(DMatrix::from_fn(n, n, f), CorrelationLabel::Original)
            .unwrap()
    }

    fn equicorrelation(n: usize, rho: f64) -> CorrelationMatrix {
        matrix(n, |i, j| if i == j { 1.0 } else { rho })
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    #[test]
    fn bounds_examples() {
        let law = mp_bounds(1.0).unwrap();
        assert_eq!((law.lambda_minus, law.lambda_plus), (0.0, 4.0));
        let law = mp_bounds(4.0).unwrap();
        assert!((law.lambda_minus - 0.25).abs() < 1e-15);
        assert!((law.lambda_plus - 2.25).abs() < 1e-15);
        // 1 + 473/2845 +- 2 sqrt(473/2845)
        let law = mp_bounds(2845.0 / 473.0).unwrap();
        assert!((law.lambda_plus - 1.98181).abs() < 1e-4);
        assert!((law.lambda_minus - 0.35073).abs() < 1e-4);
        assert!(mp_bounds(0.0).is_err());
        assert!(mp_bounds(-2.0).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(mp_density(3.0, 4.0).unwrap(), 0.0);
        assert_eq!(mp_density(0.1, 4.0).unwrap(), 0.0);
        assert_eq!(mp_density(2.25, 4.0).unwrap(), 0.0);
        assert_eq!(mp_density(0.25, 4.0).unwrap(), 0.0);
        let p = mp_density(1.25, 4.0).unwrap();
        assert!((p - 4.0 / std::f64::consts::TAU / 1.25).abs() < 1e-12);
        assert!((p - 0.5093).abs() < 1e-4);
        assert!(mp_density(1.0, 0.0).is_err());
    }

    #[test]
    fn identity_spectrum() {
        let d = eigendecompose(&matrix(4, |i, j| if i == j { 1.0 } else { 0.0 })).unwrap();
        assert!(d.eigenvalues().iter().all(|l| (l - 1.0).abs() < 1e-14));
        assert!(max_abs(&(d.reconstruct() - DMatrix::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let rho = 0.35;
        let d = eigendecompose(&equicorrelation(2, rho)).unwrap();
        assert!((d.eigenvalues()[0] - (1.0 - rho)).abs() < 1e-14);
        assert!((d.eigenvalues()[1] - (1.0 + rho)).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let low = d.eigenvector(0);
        let high = d.eigenvector(1);
        assert!((low[0] - s).abs() < 1e-12 && (low[1] + s).abs() < 1e-12);
        assert!((high[0] - s).abs() < 1e-12 && (high[1] - s).abs() < 1e-12);
    }

    #[test]
    fn equicorrelation_eigenvalues() {
        let d = eigendecompose(&equicorrelation(3, 0.5)).unwrap();
        let expected = [0.5, 0.5, 2.0];
        for (l, e) in d.eigenvalues().iter().zip(expected) {
            assert!((l - e).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_invariants_and_sign_convention() {
        let c = correlation(&synth_iid(30, 120, 5).unwrap()).unwrap();
        let d = eigendecompose(&c).unwrap();
        let v = d.eigenvectors();
        assert!(max_abs(&(v.transpose() * v - DMatrix::identity(30, 30))) < 1e-8);
        assert!(max_abs(&(c.entries() - d.reconstruct())) < 1e-8);
        assert!(d.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        for k in 0..d.n() {
            let col = d.eigenvector(k);
            let big = col.iter().cloned().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
        assert_eq!(d, eigendecompose(&c).unwrap());
    }

    #[test]
    fn partition_all_random() {
        let c = equicorrelation(3, 0.1);
        let d = eigendecompose(&c).unwrap();
        let p = partition(&d, &mp_bounds(1.0).unwrap());
        assert!(p.filter_is_empty());
        assert!(max_abs(p.c_filter.entries()) == 0.0);
        assert!(max_abs(&(p.c_random.entries() - c.entries())) < 1e-12);
    }

    #[test]
    fn partition_equicorrelation() {
        let d = eigendecompose(&equicorrelation(3, 0.9)).unwrap();
        let law = MarchenkoPasturLaw {
            q: 1.0,
            lambda_minus: 0.0,
            lambda_plus: 1.5,
        };
        let p = partition(&d, &law);
        assert_eq!(p.deviating_indices, vec![2]);
        assert_eq!(p.random_indices, vec![0, 1]);
        let expected = 2.8 / 3.0;
        assert!(p.c_filter.entries().iter().all(|x| (x - expected).abs() < 1e-12));
        assert_eq!(p.c_filter.label(), CorrelationLabel::Filtered);
        assert_eq!(p.c_random.label(), CorrelationLabel::RandomBand);
    }

    #[test]
    fn one_factor_has_single_deviating_mode() {
        let (r, _) = synth_one_factor(60, 600, (0.8, 1.2), 0.5, 17).unwrap();
        let c = correlation(&r).unwrap();
        let d = eigendecompose(&c).unwrap();
        let law = mp_bounds(r.len() as f64 / r.n_assets() as f64).unwrap();
        let p = partition(&d, &law);
        assert_eq!(p.deviating_indices, vec![59]);
        assert!(max_abs(&(p.c_largest.entries() - p.c_filter.entries())) < 1e-6);
        let sum = p.c_random.entries() + p.c_filter.entries();
        assert!(max_abs(&(c.entries() - sum)) < 1e-10);

        let repaired = restore_unit_diagonal(&p.c_filter).unwrap();
        for i in 0..60 {
            assert_eq!(repaired.get(i, i), 1.0);
            for j in 0..60 {
                if i != j {
                    assert_eq!(repaired.get(i, j), p.c_filter.get(i, j));
                }
            }
        }
        let min = eigendecompose(&repaired).unwrap().eigenvalues()[0];
        assert!(min >= -1e-10);
    }

    #[test]
    fn largest_mode_is_rank_one() {
        let c = equicorrelation(5, 0.4);
        let p = partition(&eigendecompose(&c).unwrap(), &mp_bounds(4.0).unwrap());
        let sv = p.c_largest.entries().clone().singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[1] < 1e-8 * sv[0]);
    }

    #[test]
    fn restore_diagonal_cases() {
        let c = equicorrelation(3, 0.2);
        assert_eq!(restore_unit_diagonal(&c).unwrap(), c);
        let zero =
            CorrelationMatrix::from_entries(DMatrix::zeros(3, 3), CorrelationLabel::Filtered).unwrap();
        assert_eq!(
            restore_unit_diagonal(&zero).unwrap().entries(),
            &DMatrix::identity(3, 3)
        );
        let big = CorrelationMatrix::from_entries(
            DMatrix::from_diagonal_element(2, 2, 1.5),
            CorrelationLabel::Filtered,
        )
        .unwrap();
        assert!(matches!(restore_unit_diagonal(&big), Err(Error::Domain(_))));
    }

    #[test]
    fn ratio_examples() {
        let d = eigendecompose(&matrix(3, |i, j| if i == j { 1.0 } else { 0.0 })).unwrap();
        assert!((ratio_to_bound(&d, &mp_bounds(4.0).unwrap()) - 1.0 / 2.25).abs() < 1e-12);

        let d = eigendecompose(&equicorrelation(200, 0.3)).unwrap();
        let ratio = ratio_to_bound(&d, &mp_bounds(4.0).unwrap());
        assert!((ratio - (1.0 + 199.0 * 0.3) / 2.25).abs() < 1e-9);
        assert!((ratio - 27.0).abs() < 0.1);
    }

    #[test]
    fn spectrum_histogram_identity() {
        let d = eigendecompose(&matrix(5, |i, j| if i == j { 1.0 } else { 0.0 })).unwrap();
        let law = mp_bounds(4.0).unwrap();
        let s = spectrum_histogram(&d, &law, 10).unwrap();
        let nonzero: Vec<usize> = (0..10).filter(|&k| s.histogram.densities[k] > 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        let k = nonzero[0];
        assert!(s.histogram.edges[k] <= 1.0 && 1.0 < s.histogram.edges[k + 1]);
        assert!((s.histogram.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(s.mp_density.len(), 10);
    }

    #[test]
    fn one_factor_spectrum_leaves_support() {
        let (r, _) = synth_one_factor(50, 500, (0.5, 1.5), 1.0, 2).unwrap();
        let d = eigendecompose(&correlation(&r).unwrap()).unwrap();
        let law = mp_bounds(10.0).unwrap();
        let s = spectrum_histogram(&d, &law, 40).unwrap();
        let h = &s.histogram;
        let outside: f64 = (0..h.bins())
            .filter(|&k| h.edges[k] > law.lambda_plus)
            .map(|k| h.densities[k] * (h.edges[k + 1] - h.edges[k]))
            .sum();
        assert!(outside > 0.0);
    }
}
