//! Price and return panels: CSV ingestion, return construction,
//! standardization, rolling windows and seeded synthetic generators.
//!
//! Panels are stored asset-major: an `N x L` matrix where row `i` is the
//! series of asset `i`. Values are immutable once a panel is built; every
//! transform returns a new panel.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::stats;

/// Orientation of a panel CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    /// Header row holds asset identifiers, first column holds dates.
    #[default]
    RowsAreDates,
    /// Header row holds dates, first column holds asset identifiers.
    RowsAreAssets,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rows-are-dates" => Ok(Layout::RowsAreDates),
            "rows-are-assets" => Ok(Layout::RowsAreAssets),
            other => Err(format!(
                "unknown layout `{other}` (expected rows-are-dates or rows-are-assets)"
            )),
        }
    }
}

/// How returns are formed from consecutive prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnKind {
    #[default]
    Log,
    Simple,
}

impl std::str::FromStr for ReturnKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "log" => Ok(ReturnKind::Log),
            "simple" => Ok(ReturnKind::Simple),
            other => Err(format!("unknown return type `{other}` (expected log or simple)")),
        }
    }
}

/// Where a return panel came from. Carried through transforms so that
/// correlation matrices can be labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelOrigin {
    Observed,
    SyntheticIid,
    SyntheticOneFactor,
    SyntheticRegimeShift,
}

fn check_times_increasing(times: &[String]) -> Result<()> {
    let numeric: Option<Vec<f64>> = times.iter().map(|t| t.trim().parse::<f64>().ok()).collect();
    for k in 1..times.len() {
        let order = match &numeric {
            Some(values) => values[k - 1].partial_cmp(&values[k]).unwrap_or(Ordering::Equal),
            None => times[k - 1].cmp(&times[k]),
        };
        if order != Ordering::Less {
            return Err(Error::Domain(format!(
                "timestamps not strictly increasing: `{}` followed by `{}`",
                times[k - 1], times[k]
            )));
        }
    }
    Ok(())
}

/// Raw prices, `N` assets by `L + 1` dates, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    assets: Vec<String>,
    times: Vec<String>,
    prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(assets: Vec<String>, times: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != assets.len() || prices.ncols() != times.len() {
            return Err(Error::Shape(format!(
                "price matrix is {}x{} but {} assets and {} dates were given",
                prices.nrows(),
                prices.ncols(),
                assets.len(),
                times.len()
            )));
        }
        if assets.is_empty() {
            return Err(Error::Shape("panel has no assets".into()));
        }
        if times.len() < 3 {
            return Err(Error::Shape(format!(
                "need at least 3 price dates to form 2 returns, got {}",
                times.len()
            )));
        }
        for i in 0..prices.nrows() {
            for t in 0..prices.ncols() {
                let p = prices[(i, t)];
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::Domain(format!(
                        "non-positive price {p} for asset `{}` at `{}`",
                        assets[i], times[t]
                    )));
                }
            }
        }
        check_times_increasing(&times)?;
        Ok(Self {
            assets,
            times,
            prices,
        })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_dates(&self) -> usize {
        self.times.len()
    }

    pub fn write_csv<W: Write>(&self, writer: W, layout: Layout) -> Result<()> {
        write_matrix_csv(writer, &self.assets, &self.times, &self.prices, layout)
    }
}

/// Read a price panel from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, layout: Layout) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, layout)
}

/// Read a price panel from any CSV source. Lines starting with `#` are
/// skipped so that panels written by this crate can be read back.
pub fn read_csv<R: Read>(reader: R, layout: Layout) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut labels = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let Some(head) = &header else {
            header = Some(record.iter().skip(1).map(str::to_owned).collect());
            continue;
        };
        if record.len() != head.len() + 1 {
            return Err(Error::Shape(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                head.len() + 1
            )));
        }
        labels.push(record[0].to_owned());
        let mut parsed = Vec::with_capacity(head.len());
        for (k, cell) in record.iter().enumerate().skip(1) {
            let column = k + 1;
            if cell.is_empty() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: "missing value".into(),
                });
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("`{cell}` is not a number"),
            })?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!(
                    "non-positive price {cell} at row {row}, column {column}"
                )));
            }
            parsed.push(value);
        }
        values.push(parsed);
    }

    let header = header.ok_or_else(|| Error::Shape("file has no header row".into()))?;
    if header.is_empty() {
        return Err(Error::Shape("header row has no data columns".into()));
    }
    let n_rows = values.len();
    let n_cols = header.len();
    let (assets, times, prices) = match layout {
        Layout::RowsAreDates => (
            header,
            labels,
            DMatrix::from_fn(n_cols, n_rows, |i, t| values[t][i]),
        ),
        Layout::RowsAreAssets => (
            labels,
            header,
            DMatrix::from_fn(n_rows, n_cols, |i, t| values[i][t]),
        ),
    };
    PricePanel::new(assets, times, prices)
}

pub(crate) fn write_matrix_csv<W: Write>(
    writer: W,
    assets: &[String],
    times: &[String],
    data: &DMatrix<f64>,
    layout: Layout,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
    match layout {
        Layout::RowsAreDates => {
            w.write_record(std::iter::once("date").chain(assets.iter().map(String::as_str)))
                .map_err(csv_err)?;
            for (t, time) in times.iter().enumerate() {
                let mut rec = vec![time.clone()];
                rec.extend((0..assets.len()).map(|i| format_f64(data[(i, t)])));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        Layout::RowsAreAssets => {
            w.write_record(std::iter::once("asset").chain(times.iter().map(String::as_str)))
                .map_err(csv_err)?;
            for (i, asset) in assets.iter().enumerate() {
                let mut rec = vec![asset.clone()];
                rec.extend((0..times.len()).map(|t| format_f64(data[(i, t)])));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    w.flush()
        .map_err(|e| Error::io("<csv writer>", e))
}

/// Shortest representation that round-trips exactly.
pub(crate) fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Metadata recorded by the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelMetadata {
    pub origin: PanelOrigin,
    /// Factor loadings used by `synth_one_factor`, one per asset.
    pub generating_betas: Option<Vec<f64>>,
    pub noise_sd: Option<f64>,
    /// Half-open range of time indices with raised correlation.
    pub spike: Option<(usize, usize)>,
}

impl PanelMetadata {
    fn observed() -> Self {
        Self {
            origin: PanelOrigin::Observed,
            generating_betas: None,
            noise_sd: None,
            spike: None,
        }
    }
}

/// `N x L` returns with identifiers and timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    assets: Vec<String>,
    times: Vec<String>,
    returns: DMatrix<f64>,
    standardized: bool,
    metadata: PanelMetadata,
}

impl ReturnPanel {
    pub fn new(assets: Vec<String>, times: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        Self::with_metadata(assets, times, returns, PanelMetadata::observed())
    }

    pub fn with_metadata(
        assets: Vec<String>,
        times: Vec<String>,
        returns: DMatrix<f64>,
        metadata: PanelMetadata,
    ) -> Result<Self> {
        if returns.nrows() != assets.len() || returns.ncols() != times.len() {
            return Err(Error::Shape(format!(
                "return matrix is {}x{} but {} assets and {} dates were given",
                returns.nrows(),
                returns.ncols(),
                assets.len(),
                times.len()
            )));
        }
        if assets.is_empty() || times.len() < 2 {
            return Err(Error::Shape(format!(
                "return panel needs at least 1 asset and 2 observations, got {}x{}",
                assets.len(),
                times.len()
            )));
        }
        if let Some(betas) = &metadata.generating_betas {
            if betas.len() != assets.len() {
                return Err(Error::Shape("one generating beta per asset required".into()));
            }
        }
        if returns.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("returns must be finite".into()));
        }
        Ok(Self {
            assets,
            times,
            returns,
            standardized: false,
            metadata,
        })
    }

    /// Build from a row-major `n x l` buffer with generated identifiers.
    pub fn from_row_major(n: usize, l: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * l {
            return Err(Error::Shape(format!(
                "buffer holds {} values, expected {n}x{l}",
                data.len()
            )));
        }
        Self::new(
            asset_ids(n),
            time_ids(l),
            DMatrix::from_row_slice(n, l, data),
        )
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn metadata(&self) -> &PanelMetadata {
        &self.metadata
    }

    pub fn origin(&self) -> PanelOrigin {
        self.metadata.origin
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Number of observations `L`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.returns.row(i).iter().copied().collect()
    }

    /// Per-asset arithmetic means.
    pub fn means(&self) -> Vec<f64> {
        (0..self.n_assets()).map(|i| stats::mean(&self.row(i))).collect()
    }

    /// Per-asset population standard deviations.
    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.n_assets()).map(|i| stats::pop_sd(&self.row(i))).collect()
    }

    /// Columns `start .. start + len`, not re-standardized.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len < 2 || start + len > self.len() {
            return Err(Error::Shape(format!(
                "slice [{start}, {}) outside panel of length {}",
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            assets: self.assets.clone(),
            times: self.times[start..start + len].to_vec(),
            returns: self.returns.columns(start, len).into_owned(),
            standardized: false,
            metadata: self.metadata.clone(),
        })
    }

    /// Keep only the listed assets, in the given order.
    pub fn select_assets(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.iter().any(|&i| i >= self.n_assets()) {
            return Err(Error::Shape("asset selection out of range".into()));
        }
        let returns = DMatrix::from_fn(indices.len(), self.len(), |r, t| {
            self.returns[(indices[r], t)]
        });
        let mut metadata = self.metadata.clone();
        metadata.generating_betas = metadata
            .generating_betas
            .map(|b| indices.iter().map(|&i| b[i]).collect());
        Ok(Self {
            assets: indices.iter().map(|&i| self.assets[i].clone()).collect(),
            times: self.times.clone(),
            returns,
            standardized: self.standardized,
            metadata,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W, layout: Layout) -> Result<()> {
        write_matrix_csv(writer, &self.assets, &self.times, &self.returns, layout)
    }
}

/// Market index series regressed against eigenportfolios.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    times: Vec<String>,
    values: Vec<f64>,
    standardized: bool,
}

impl MarketSeries {
    pub fn new(times: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} timestamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("market values must be finite".into()));
        }
        Ok(Self {
            times,
            values,
            standardized: false,
        })
    }

    /// Returns of a single-column price panel.
    pub fn from_prices(prices: &PricePanel, kind: ReturnKind) -> Result<Self> {
        if prices.n_assets() != 1 {
            return Err(Error::Shape(format!(
                "market file must hold exactly one series, found {}",
                prices.n_assets()
            )));
        }
        let r = returns(prices, kind);
        Self::new(r.times, r.returns.row(0).iter().copied().collect())
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn standardize(&self) -> Result<Self> {
        if self.standardized {
            return Ok(self.clone());
        }
        let values = stats::standardized(&self.values)
            .ok_or_else(|| Error::DegenerateSeries("market series is constant".into()))?;
        Ok(Self {
            times: self.times.clone(),
            values,
            standardized: true,
        })
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::Shape("market slice out of range".into()));
        }
        Self::new(
            self.times[start..start + len].to_vec(),
            self.values[start..start + len].to_vec(),
        )
    }

    /// Fails unless the timestamps match `panel` exactly.
    pub fn check_aligned(&self, panel: &ReturnPanel) -> Result<()> {
        if self.times.len() != panel.len() {
            return Err(Error::Alignment(format!(
                "market has {} observations, panel has {}",
                self.times.len(),
                panel.len()
            )));
        }
        if let Some((k, (a, b))) = self
            .times
            .iter()
            .zip(panel.times())
            .enumerate()
            .find(|(_, (a, b))| a != b)
        {
            return Err(Error::Alignment(format!(
                "date mismatch at observation {k}: market `{a}`, panel `{b}`"
            )));
        }
        Ok(())
    }
}

fn returns(p: &PricePanel, kind: ReturnKind) -> ReturnPanel {
    let l = p.n_dates() - 1;
    let prices = p.prices();
    let returns = DMatrix::from_fn(p.n_assets(), l, |i, t| {
        let ratio = prices[(i, t + 1)] / prices[(i, t)];
        match kind {
            ReturnKind::Log => ratio.ln(),
            ReturnKind::Simple => ratio - 1.0,
        }
    });
    ReturnPanel {
        assets: p.assets().to_vec(),
        times: p.times()[1..].to_vec(),
        returns,
        standardized: false,
        metadata: PanelMetadata::observed(),
    }
}

/// `ln(p[t+1] / p[t])`, stamped with the later date.
pub fn log_returns(p: &PricePanel) -> ReturnPanel {
    returns(p, ReturnKind::Log)
}

pub fn simple_returns(p: &PricePanel) -> ReturnPanel {
    returns(p, ReturnKind::Simple)
}

pub fn to_returns(p: &PricePanel, kind: ReturnKind) -> ReturnPanel {
    returns(p, kind)
}

/// Rescale every row to mean 0 and population standard deviation 1.
pub fn standardize(r: &ReturnPanel) -> Result<ReturnPanel> {
    let n = r.n_assets();
    let l = r.len();
    let mut out = DMatrix::zeros(n, l);
    for i in 0..n {
        let row = stats::standardized(&r.row(i)).ok_or_else(|| {
            Error::DegenerateSeries(format!("asset `{}` has zero variance", r.assets[i]))
        })?;
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(ReturnPanel {
        assets: r.assets.clone(),
        times: r.times.clone(),
        returns: out,
        standardized: true,
        metadata: r.metadata.clone(),
    })
}

/// Start offsets `0, step, 2 step, ...` of every full window.
pub fn window_starts(total: usize, length: usize, step: usize) -> Result<Vec<usize>> {
    if step == 0 {
        return Err(Error::Shape("window step must be at least 1".into()));
    }
    if length < 2 || length > total {
        return Err(Error::Shape(format!(
            "window length {length} not in [2, {total}]"
        )));
    }
    Ok((0..=(total - length) / step).map(|k| k * step).collect())
}

/// Rolling windows, each re-standardized on its own columns.
pub fn windows(r: &ReturnPanel, length: usize, step: usize) -> Result<Vec<ReturnPanel>> {
    window_starts(r.len(), length, step)?
        .into_iter()
        .map(|start| standardize(&r.slice(start, length)?))
        .collect()
}

pub(crate) fn asset_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(3);
    (0..n).map(|i| format!("A{:0width$}", i + 1)).collect()
}

pub(crate) fn time_ids(l: usize) -> Vec<String> {
    (0..l).map(|t| t.to_string()).collect()
}

fn check_dims(n: usize, l: usize) -> Result<()> {
    if n < 2 || l < 2 {
        return Err(Error::Shape(format!(
            "synthetic panel needs n >= 2 and l >= 2, got {n}x{l}"
        )));
    }
    Ok(())
}

/// Independent standard Gaussian panel. Entries are drawn row by row.
pub fn synth_iid(n: usize, l: usize, seed: u64) -> Result<ReturnPanel> {
    check_dims(n, l)?;
    let mut rng = SeededRng::new(seed);
    let mut data = vec![0.0; n * l];
    for x in data.iter_mut() {
        *x = rng.standard_normal();
    }
    let mut panel = ReturnPanel::from_row_major(n, l, &data)?;
    panel.metadata.origin = PanelOrigin::SyntheticIid;
    Ok(panel)
}

/// One-factor panel `r_i(t) = beta_i m(t) + eps_i(t)`.
///
/// Draw order: the `l` market values, then the `n` loadings uniformly on
/// `beta_range`, then the noise row by row.
pub fn synth_one_factor(
    n: usize,
    l: usize,
    beta_range: (f64, f64),
    noise_sd: f64,
    seed: u64,
) -> Result<(ReturnPanel, MarketSeries)> {
    check_dims(n, l)?;
    let (lo, hi) = beta_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Domain(format!(
            "beta range [{lo}, {hi}] must be a finite interval in (0, inf)"
        )));
    }
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::Domain(format!("noise_sd must be positive, got {noise_sd}")));
    }
    let mut rng = SeededRng::new(seed);
    let market: Vec<f64> = (0..l).map(|_| rng.standard_normal()).collect();
    let betas: Vec<f64> = (0..n).map(|_| rng.uniform_in(lo, hi)).collect();
    let mut returns = DMatrix::zeros(n, l);
    for i in 0..n {
        for t in 0..l {
            returns[(i, t)] = betas[i] * market[t] + rng.normal(0.0, noise_sd);
        }
    }
    let times = time_ids(l);
    let panel = ReturnPanel::with_metadata(
        asset_ids(n),
        times.clone(),
        returns,
        PanelMetadata {
            origin: PanelOrigin::SyntheticOneFactor,
            generating_betas: Some(betas),
            noise_sd: Some(noise_sd),
            spike: None,
        },
    )?;
    Ok((panel, MarketSeries::new(times, market)?))
}

/// Parameters of [`synth_regime_shift`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeShift {
    pub n: usize,
    pub l: usize,
    /// Half-open time range `[start, end)` of the high-correlation regime.
    pub spike: (usize, usize),
    pub calm_rho: f64,
    pub spike_rho: f64,
    pub beta_range: (f64, f64),
    pub noise_sd: f64,
}

impl RegimeShift {
    /// Spike over the middle fifth of the sample, mean correlation 0.1
    /// outside and 0.6 inside.
    pub fn centered(n: usize, l: usize) -> Self {
        Self {
            n,
            l,
            spike: (2 * l / 5, 3 * l / 5),
            calm_rho: 0.1,
            spike_rho: 0.6,
            beta_range: (0.5, 1.5),
            noise_sd: 1.0,
        }
    }
}

fn mean_pair_correlation(betas: &[f64], factor_sd: f64, noise_sd: f64) -> f64 {
    let a: Vec<f64> = betas
        .iter()
        .map(|b| {
            let load = b * factor_sd;
            load / (load * load + noise_sd * noise_sd).sqrt()
        })
        .collect();
    let n = a.len() as f64;
    let sum: f64 = a.iter().sum();
    let sq: f64 = a.iter().map(|x| x * x).sum();
    (sum * sum - sq) / (n * (n - 1.0))
}

/// Factor volatility giving population mean pairwise correlation `rho`.
fn factor_sd_for(betas: &[f64], noise_sd: f64, rho: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while mean_pair_correlation(betas, hi, noise_sd) < rho {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_pair_correlation(betas, mid, noise_sd) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-factor panel whose factor volatility jumps inside `spec.spike`, so
/// the mean pairwise correlation moves from `calm_rho` to `spike_rho`.
/// The returned market series is the unit-variance factor draw.
pub fn synth_regime_shift(spec: RegimeShift, seed: u64) -> Result<(ReturnPanel, MarketSeries)> {
    let RegimeShift {
        n,
        l,
        spike,
        calm_rho,
        spike_rho,
        beta_range: (lo, hi),
        noise_sd,
    } = spec;
    check_dims(n, l)?;
    if n < 2 {
        return Err(Error::Shape("regime-shift panel needs at least 2 assets".into()));
    }
    if !(spike.0 < spike.1 && spike.1 <= l) {
        return Err(Error::Shape(format!(
            "spike range [{}, {}) must be non-empty and inside 0..{l}",
            spike.0, spike.1
        )));
    }
    for (name, rho) in [("calm_rho", calm_rho), ("spike_rho", spike_rho)] {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("{name} must be in (0, 1), got {rho}")));
        }
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::Domain(format!(
            "beta range [{lo}, {hi}] must be a finite interval in (0, inf)"
        )));
    }
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::Domain(format!("noise_sd must be positive, got {noise_sd}")));
    }
    let mut rng = SeededRng::new(seed);
    let market: Vec<f64> = (0..l).map(|_| rng.standard_normal()).collect();
    let betas: Vec<f64> = (0..n).map(|_| rng.uniform_in(lo, hi)).collect();
    let calm_sd = factor_sd_for(&betas, noise_sd, calm_rho);
    let spike_sd = factor_sd_for(&betas, noise_sd, spike_rho);
    let mut returns = DMatrix::zeros(n, l);
    for i in 0..n {
        for t in 0..l {
            let scale = if (spike.0..spike.1).contains(&t) { spike_sd } else { calm_sd };
            returns[(i, t)] = betas[i] * scale * market[t] + rng.normal(0.0, noise_sd);
        }
    }
    let times = time_ids(l);
    let panel = ReturnPanel::with_metadata(
        asset_ids(n),
        times.clone(),
        returns,
        PanelMetadata {
            origin: PanelOrigin::SyntheticRegimeShift,
            generating_betas: Some(betas),
            noise_sd: Some(noise_sd),
            spike: Some(spike),
        },
    )?;
    Ok((panel, MarketSeries::new(times, market)?))
}
