//! C interface to `rmt-portfolio`.
//!
//! Objects cross the boundary as opaque handles created by a constructor
//! function and released by the matching `*_free`. Every fallible call
//! returns an [`RmtStatus`]; on failure a message for the calling thread is
//! available from [`rmt_last_error`]. Matrices are exchanged row-major.
//! Output buffers are passed with their capacity in elements and a call
//! fails with `RMT_STATUS_BUFFER_TOO_SMALL` when it is too short.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::slice;

use nalgebra::DMatrix;
use rmt_portfolio::correlation::{self, CorrelationLabel, CorrelationMatrix};
use rmt_portfolio::markowitz::{self, Frontier, WeightVector};
use rmt_portfolio::panel::{self, ReturnPanel};
use rmt_portfolio::pipeline::{self, CorrVariant};
use rmt_portfolio::rmt::{self, RmtPartition, SpectralDecomposition};
use rmt_portfolio::scaling::{self, Branch, FitOptions};
use rmt_portfolio::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmtStatus {
    Ok = 0,
    NullPointer = 1,
    BufferTooSmall = 2,
    InvalidArgument = 3,
    ParseError = 4,
    ShapeError = 5,
    DomainError = 6,
    DegenerateSeries = 7,
    ConvergenceError = 8,
    InfeasibleTarget = 9,
    NumericalFailure = 10,
    InsufficientPoints = 11,
    DegenerateAbscissa = 12,
    AlignmentError = 13,
    IoError = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmtCorrVariant {
    Original = 0,
    RandomBand = 1,
    Filtered = 2,
    Largest = 3,
}

impl From<RmtCorrVariant> for CorrVariant {
    fn from(v: RmtCorrVariant) -> Self {
        match v {
            RmtCorrVariant::Original => CorrVariant::Original,
            RmtCorrVariant::RandomBand => CorrVariant::RandomBand,
            RmtCorrVariant::Filtered => CorrVariant::Filtered,
            RmtCorrVariant::Largest => CorrVariant::Largest,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmtComponent {
    RandomBand = 0,
    Filtered = 1,
    LargestMode = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmtPowerLaw {
    pub gamma: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub excluded: usize,
}

impl From<scaling::PowerLawFit> for RmtPowerLaw {
    fn from(f: scaling::PowerLawFit) -> Self {
        Self {
            gamma: f.gamma,
            log_intercept: f.log_intercept,
            r_squared: f.r_squared,
            n_points: f.n_points,
            excluded: f.excluded,
        }
    }
}

/// Asset-by-time return panel.
pub struct RmtPanel(ReturnPanel);

pub struct RmtCorrelation(CorrelationMatrix);

pub struct RmtSpectrum(SpectralDecomposition);

pub struct RmtPartitionHandle(RmtPartition);

pub struct RmtFrontier(Frontier);

enum Failure {
    Null(&'static str),
    Buffer { needed: usize, given: usize },
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> RmtStatus {
        match self {
            Failure::Null(_) => RmtStatus::NullPointer,
            Failure::Buffer { .. } => RmtStatus::BufferTooSmall,
            Failure::Invalid(_) => RmtStatus::InvalidArgument,
            Failure::Core(e) => match e {
                Error::Parse { .. } => RmtStatus::ParseError,
                Error::Shape(_) => RmtStatus::ShapeError,
                Error::Domain(_) => RmtStatus::DomainError,
                Error::DegenerateSeries(_) => RmtStatus::DegenerateSeries,
                Error::Convergence(_) => RmtStatus::ConvergenceError,
                Error::InfeasibleTarget { .. } => RmtStatus::InfeasibleTarget,
                Error::NumericalFailure(_) => RmtStatus::NumericalFailure,
                Error::InsufficientPoints { .. } => RmtStatus::InsufficientPoints,
                Error::DegenerateAbscissa => RmtStatus::DegenerateAbscissa,
                Error::Alignment(_) => RmtStatus::AlignmentError,
                Error::Io { .. } => RmtStatus::IoError,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Null(name) => format!("null pointer passed for `{name}`"),
            Failure::Buffer { needed, given } => {
                format!("buffer holds {given} elements, {needed} required")
            }
            Failure::Invalid(m) => m.clone(),
            Failure::Core(e) => e.status(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RmtStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            RmtStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(failure.message());
            failure.status()
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RmtStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write<T: Copy>(out: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_out(values: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < values.len() {
        return Err(Failure::Buffer {
            needed: values.len(),
            given: capacity,
        });
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

unsafe fn hand_out<T>(value: T, out: *mut *mut T) -> Result<(), Failure> {
    write(out, Box::into_raw(Box::new(value)), "out")
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn row_major(c: &CorrelationMatrix) -> Vec<f64> {
    let m = c.entries();
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rmt_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rmt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn rmt_mp_bounds(q: f64, lambda_minus: *mut f64, lambda_plus: *mut f64) -> RmtStatus {
    guard(|| {
        let law = rmt::mp_bounds(q)?;
        write(lambda_minus, law.lambda_minus, "lambda_minus")?;
        write(lambda_plus, law.lambda_plus, "lambda_plus")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_mp_density(lambda: f64, q: f64, out: *mut f64) -> RmtStatus {
    guard(|| write(out, rmt::mp_density(lambda, q)?, "out"))
}

/// Panel from an `n x l` row-major buffer, one row per asset.
#[no_mangle]
pub unsafe extern "C" fn rmt_panel_from_row_major(
    n: usize,
    l: usize,
    data: *const f64,
    out: *mut *mut RmtPanel,
) -> RmtStatus {
    guard(|| {
        let len = n.checked_mul(l).ok_or_else(|| Failure::Invalid("n * l overflows".into()))?;
        let values = input(data, len, "data")?;
        hand_out(RmtPanel(ReturnPanel::from_row_major(n, l, values)?), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_panel_synth_iid(n: usize, l: usize, seed: u64, out: *mut *mut RmtPanel) -> RmtStatus {
    guard(|| hand_out(RmtPanel(panel::synth_iid(n, l, seed)?), out))
}

/// One-factor panel; the market series is written to `market` (length `l`)
/// when it is not null.
#[no_mangle]
pub unsafe extern "C" fn rmt_panel_synth_one_factor(
    n: usize,
    l: usize,
    beta_lo: f64,
    beta_hi: f64,
    noise_sd: f64,
    seed: u64,
    market: *mut f64,
    out: *mut *mut RmtPanel,
) -> RmtStatus {
    guard(|| {
        let (r, m) = panel::synth_one_factor(n, l, (beta_lo, beta_hi), noise_sd, seed)?;
        if !market.is_null() {
            copy_out(m.values(), market, l)?;
        }
        hand_out(RmtPanel(r), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_panel_dims(p: *const RmtPanel, n: *mut usize, l: *mut usize) -> RmtStatus {
    guard(|| {
        let p = get(p, "panel")?;
        write(n, p.0.n_assets(), "n")?;
        write(l, p.0.len(), "l")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_panel_free(p: *mut RmtPanel) {
    release(p)
}

#[no_mangle]
pub unsafe extern "C" fn rmt_correlation(p: *const RmtPanel, out: *mut *mut RmtCorrelation) -> RmtStatus {
    guard(|| {
        let p = get(p, "panel")?;
        hand_out(RmtCorrelation(correlation::correlation(&p.0)?), out)
    })
}

/// Correlation handle from an `n x n` row-major buffer.
#[no_mangle]
pub unsafe extern "C" fn rmt_correlation_from_row_major(
    n: usize,
    data: *const f64,
    out: *mut *mut RmtCorrelation,
) -> RmtStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or_else(|| Failure::Invalid("n * n overflows".into()))?;
        let values = input(data, len, "data")?;
        let m = DMatrix::from_row_slice(n, n, values);
        hand_out(RmtCorrelation(CorrelationMatrix::from_entries(m, CorrelationLabel::Original)?), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_correlation_n(c: *const RmtCorrelation, n: *mut usize) -> RmtStatus {
    guard(|| write(n, get(c, "correlation")?.0.n(), "n"))
}

/// Copy the `n x n` entries row-major into `out`.
#[no_mangle]
pub unsafe extern "C" fn rmt_correlation_entries(c: *const RmtCorrelation, out: *mut f64, capacity: usize) -> RmtStatus {
    guard(|| copy_out(&row_major(&get(c, "correlation")?.0), out, capacity))
}

#[no_mangle]
pub unsafe extern "C" fn rmt_correlation_free(c: *mut RmtCorrelation) {
    release(c)
}

#[no_mangle]
pub unsafe extern "C" fn rmt_eigendecompose(c: *const RmtCorrelation, out: *mut *mut RmtSpectrum) -> RmtStatus {
    guard(|| hand_out(RmtSpectrum(rmt::eigendecompose(&get(c, "correlation")?.0)?), out))
}

/// Eigenvalues in ascending order, `n` of them.
#[no_mangle]
pub unsafe extern "C" fn rmt_spectrum_eigenvalues(s: *const RmtSpectrum, out: *mut f64, capacity: usize) -> RmtStatus {
    guard(|| copy_out(get(s, "spectrum")?.0.eigenvalues(), out, capacity))
}

/// Unit eigenvector `k`, paired with the `k`-th smallest eigenvalue.
#[no_mangle]
pub unsafe extern "C" fn rmt_spectrum_eigenvector(
    s: *const RmtSpectrum,
    k: usize,
    out: *mut f64,
    capacity: usize,
) -> RmtStatus {
    guard(|| {
        let s = &get(s, "spectrum")?.0;
        if k >= s.n() {
            return Err(Failure::Invalid(format!("eigenvector index {k} out of range for n = {}", s.n())));
        }
        copy_out(s.eigenvector(k).as_slice(), out, capacity)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_spectrum_free(s: *mut RmtSpectrum) {
    release(s)
}

/// Split the spectrum at the upper edge of the law for `q = L / N`.
#[no_mangle]
pub unsafe extern "C" fn rmt_partition(
    s: *const RmtSpectrum,
    q: f64,
    out: *mut *mut RmtPartitionHandle,
) -> RmtStatus {
    guard(|| {
        let s = &get(s, "spectrum")?.0;
        let law = rmt::mp_bounds(q)?;
        hand_out(RmtPartitionHandle(rmt::partition(s, &law)), out)
    })
}

/// Number of eigenvalues above the upper edge.
#[no_mangle]
pub unsafe extern "C" fn rmt_partition_deviating_count(p: *const RmtPartitionHandle, out: *mut usize) -> RmtStatus {
    guard(|| write(out, get(p, "partition")?.0.deviating_indices.len(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn rmt_partition_component(
    p: *const RmtPartitionHandle,
    component: RmtComponent,
    out: *mut f64,
    capacity: usize,
) -> RmtStatus {
    guard(|| {
        let p = &get(p, "partition")?.0;
        let m = match component {
            RmtComponent::RandomBand => &p.c_random,
            RmtComponent::Filtered => &p.c_filter,
            RmtComponent::LargestMode => &p.c_largest,
        };
        copy_out(&row_major(m), out, capacity)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_partition_free(p: *mut RmtPartitionHandle) {
    release(p)
}

/// Long-only minimum-variance weights for `target_mu`, using the panel's
/// means and volatilities and the chosen correlation variant.
#[no_mangle]
pub unsafe extern "C" fn rmt_min_variance_weights(
    p: *const RmtPanel,
    variant: RmtCorrVariant,
    diagonal_repair: bool,
    target_mu: f64,
    out: *mut f64,
    capacity: usize,
) -> RmtStatus {
    guard(|| {
        let problem = pipeline::problem_from_panel(&get(p, "panel")?.0, variant.into(), diagonal_repair)?;
        let w = markowitz::min_variance_weights(&problem, target_mu)?;
        copy_out(w.as_slice(), out, capacity)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_efficient_frontier(
    p: *const RmtPanel,
    variant: RmtCorrVariant,
    diagonal_repair: bool,
    n_points: usize,
    out: *mut *mut RmtFrontier,
) -> RmtStatus {
    guard(|| {
        let problem = pipeline::problem_from_panel(&get(p, "panel")?.0, variant.into(), diagonal_repair)?;
        hand_out(RmtFrontier(markowitz::efficient_frontier(&problem, n_points)?), out)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_frontier_len(f: *const RmtFrontier, out: *mut usize) -> RmtStatus {
    guard(|| write(out, get(f, "frontier")?.0.len(), "out"))
}

/// Target return, achieved risk and weight entropy of point `k`.
#[no_mangle]
pub unsafe extern "C" fn rmt_frontier_point(
    f: *const RmtFrontier,
    k: usize,
    target_mu: *mut f64,
    sigma: *mut f64,
    entropy: *mut f64,
) -> RmtStatus {
    guard(|| {
        let point = frontier_point(&get(f, "frontier")?.0, k)?;
        write(target_mu, point.target_mu, "target_mu")?;
        write(sigma, point.achieved_sigma, "sigma")?;
        write(entropy, point.entropy, "entropy")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_frontier_weights(
    f: *const RmtFrontier,
    k: usize,
    out: *mut f64,
    capacity: usize,
) -> RmtStatus {
    guard(|| {
        let point = frontier_point(&get(f, "frontier")?.0, k)?;
        copy_out(point.weights.as_slice(), out, capacity)
    })
}

fn frontier_point(f: &Frontier, k: usize) -> Result<&markowitz::FrontierPoint, Failure> {
    f.points
        .get(k)
        .ok_or_else(|| Failure::Invalid(format!("point {k} out of range for {} points", f.len())))
}

/// Entropy against risk on the upper branch of the frontier, or on every
/// point when `upper` is false.
#[no_mangle]
pub unsafe extern "C" fn rmt_frontier_fit(
    f: *const RmtFrontier,
    upper: bool,
    entropy_floor: f64,
    out: *mut RmtPowerLaw,
) -> RmtStatus {
    guard(|| {
        let branch = if upper { Branch::Upper } else { Branch::All };
        let options = FitOptions {
            entropy_floor,
            sigma_range: None,
        };
        let fit = scaling::frontier_fit(&get(f, "frontier")?.0, branch, options)?;
        write(out, fit.into(), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rmt_frontier_free(f: *mut RmtFrontier) {
    release(f)
}

/// Shannon entropy in nats of a weight vector on the simplex.
#[no_mangle]
pub unsafe extern "C" fn rmt_weight_entropy(w: *const f64, len: usize, out: *mut f64) -> RmtStatus {
    guard(|| {
        let w = WeightVector::new(input(w, len, "w")?.to_vec())?;
        write(out, markowitz::weight_entropy(&w), "out")
    })
}

/// Least-squares fit of `ln entropy = log_intercept - gamma ln sigma`.
#[no_mangle]
pub unsafe extern "C" fn rmt_fit_power_law(
    sigma: *const f64,
    entropy: *const f64,
    len: usize,
    out: *mut RmtPowerLaw,
) -> RmtStatus {
    guard(|| {
        let xs = input(sigma, len, "sigma")?;
        let ys = input(entropy, len, "entropy")?;
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        write(out, scaling::fit_power_law(&points)?.into(), "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_distinct_statuses() {
        let cases = [
            (Failure::Core(Error::DegenerateAbscissa), RmtStatus::DegenerateAbscissa),
            (Failure::Core(Error::Convergence(3)), RmtStatus::ConvergenceError),
            (Failure::Buffer { needed: 4, given: 1 }, RmtStatus::BufferTooSmall),
            (Failure::Null("x"), RmtStatus::NullPointer),
        ];
        for (failure, status) in cases {
            assert_eq!(failure.status(), status);
        }
    }

    #[test]
    fn panics_are_contained() {
        assert_eq!(guard(|| panic!("boom")), RmtStatus::Panic);
        let msg = unsafe { CStr::from_ptr(rmt_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}
