//! Population-form moment helpers shared by the analysis modules.

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Variance with denominator `len`, not `len - 1`.
pub(crate) fn pop_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub(crate) fn pop_sd(xs: &[f64]) -> f64 {
    pop_variance(xs).sqrt()
}

/// True when the spread is indistinguishable from rounding noise on the
/// series' own magnitude.
pub(crate) fn is_degenerate(xs: &[f64], sd: f64) -> bool {
    let scale = xs.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    !sd.is_finite() || sd <= 1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Shift and scale to mean 0 and population sd 1. `None` for a constant series.
pub(crate) fn standardized(xs: &[f64]) -> Option<Vec<f64>> {
    let m = mean(xs);
    let sd = pop_sd(xs);
    if is_degenerate(xs, sd) {
        return None;
    }
    Some(xs.iter().map(|x| (x - m) / sd).collect())
}

pub(crate) fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.len() as f64
}
