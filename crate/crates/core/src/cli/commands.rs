use serde_json::json;

use super::config::{RunConfig, SyntheticSpec};
use super::output::Outputs;
use super::{CliError, Command};
use crate::correlation::{self, CorrelationLabel};
use crate::error::{Error, Result};
use crate::factor::{self, RegressionOptions};
use crate::markowitz::efficient_frontier;
use crate::panel::{self, format_f64, MarketSeries, ReturnPanel};
use crate::pipeline::{self, CorrVariant};
use crate::rmt;
use crate::scaling::{self, FitOptions, PowerLawFit, ScanConfig};

/// Seed offset for the simulated iid baseline, so it never reuses the draws
/// of a synthetic input generated from the same seed.
const BASELINE_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

/// Tolerance around the theoretical band when counting in-band eigenvalues.
const BAND_DELTA: f64 = 0.1;

pub(crate) struct Data {
    pub panel: ReturnPanel,
    pub market: Option<MarketSeries>,
}

pub(crate) fn window(config: &RunConfig, command: Command) -> (usize, usize) {
    let (length, step) = match command {
        Command::Scan => (500, 20),
        _ => (250, 21),
    };
    (
        config.window_length.unwrap_or(length),
        config.window_step.unwrap_or(step),
    )
}

fn uses_window(command: Command) -> bool {
    matches!(command, Command::Corr | Command::Scan)
}

/// Checks that need nothing but the configuration.
pub(crate) fn validate(config: &RunConfig, command: Command) -> std::result::Result<(), CliError> {
    let fail = |m: String| Err(CliError::Config(m));
    match (&config.input, &config.synthetic) {
        (None, None) => return fail("either `input` or `synthetic` must be set".into()),
        (Some(_), Some(_)) => return fail("`input` and `synthetic` are mutually exclusive".into()),
        _ => {}
    }
    if uses_window(command) {
        let (length, _) = window(config, command);
        if length < 2 {
            return fail(format!("config key `window_length`: must be at least 2, got {length}"));
        }
        if let Some(spec) = &config.synthetic {
            let l = spec.dims().1;
            if length > l {
                return fail(format!(
                    "config key `window_length`: {length} exceeds the {l} observations of `synthetic`"
                ));
            }
        }
    }
    if config.frontier_points < 2 {
        return fail("config key `frontier_points`: must be at least 2".into());
    }
    if !(config.entropy_floor >= 0.0 && config.entropy_floor.is_finite()) {
        return fail(format!(
            "config key `entropy_floor`: must be a finite nonnegative number, got {}",
            config.entropy_floor
        ));
    }
    if let Some(lo) = config.fit_sigma_min {
        if !(lo >= 0.0) {
            return fail(format!("config key `fit_sigma_min`: must be nonnegative, got {lo}"));
        }
    }
    if let (Some(lo), Some(hi)) = (config.fit_sigma_min, config.fit_sigma_max) {
        if !(lo <= hi) {
            return fail(format!(
                "config key `fit_sigma_max`: {hi} is below `fit_sigma_min` {lo}"
            ));
        }
    }
    if config.corr_variants.is_empty() {
        return fail("config key `corr_variant`: at least one variant is required".into());
    }
    if command == Command::Scan && config.corr_variants.len() != 1 {
        return fail("config key `corr_variant`: scan takes exactly one variant".into());
    }
    if command == Command::Beta {
        match (&config.synthetic, &config.market) {
            (Some(_), Some(_)) => {
                return fail("config key `market`: synthetic panels bring their own market series".into())
            }
            (Some(spec), None) if !spec.has_market() => {
                return fail("config key `synthetic`: beta needs a generator with a market factor".into())
            }
            (None, None) => return fail("config key `market`: beta needs a market series".into()),
            _ => {}
        }
    }
    Ok(())
}

pub(crate) fn load(config: &RunConfig, command: Command) -> std::result::Result<Data, CliError> {
    let data = if let Some(spec) = &config.synthetic {
        synthesize(spec, config.seed).map_err(|e| CliError::Config(format!("config key `synthetic`: {e}")))?
    } else {
        let path = config.input.as_ref().expect("validated source");
        let prices = panel::load_csv(path, config.layout)?;
        let panel = panel::to_returns(&prices, config.returns);
        let market = match (&config.market, command) {
            (Some(m), Command::Beta) => {
                let mp = panel::load_csv(m, config.layout)?;
                let series = MarketSeries::from_prices(&mp, config.returns)?;
                series.check_aligned(&panel)?;
                Some(series)
            }
            _ => None,
        };
        Data { panel, market }
    };
    if uses_window(command) {
        let (length, _) = window(config, command);
        let l = data.panel.len();
        if length > l {
            return Err(CliError::Config(format!(
                "config key `window_length`: {length} exceeds the {l} observations in the panel"
            )));
        }
    }
    Ok(data)
}

fn synthesize(spec: &SyntheticSpec, seed: u64) -> Result<Data> {
    Ok(match *spec {
        SyntheticSpec::Iid { n, l } => Data {
            panel: panel::synth_iid(n, l, seed)?,
            market: None,
        },
        SyntheticSpec::OneFactor { n, l, beta, noise } => {
            let (panel, market) = panel::synth_one_factor(n, l, beta, noise, seed)?;
            Data {
                panel,
                market: Some(market),
            }
        }
        SyntheticSpec::Regime(r) => {
            let (panel, market) = panel::synth_regime_shift(r, seed)?;
            Data {
                panel,
                market: Some(market),
            }
        }
    })
}

fn table(buf: &mut Vec<u8>, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    let csv_err = |e: csv::Error| Error::Shape(format!("csv write failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))
}

fn q_ratio(r: &ReturnPanel) -> f64 {
    r.len() as f64 / r.n_assets() as f64
}

pub(crate) fn corr(config: &RunConfig, data: &Data, out: &mut Outputs) -> Result<serde_json::Value> {
    let r = &data.panel;
    let c = correlation::correlation(r)?;
    let stats = correlation::offdiag_stats(&c)?;
    let hist = correlation::offdiag_histogram(&c, config.bins, (-1.0, 1.0))?;
    let (length, step) = window(config, Command::Corr);
    let rolling = correlation::rolling_mean_correlation(r, length, step)?;

    out.csv("correlation.csv", |b| c.write_csv(b))?;
    out.csv("offdiag_histogram.csv", |b| {
        let rows = (0..hist.bins())
            .map(|k| {
                vec![
                    format_f64(hist.edges[k]),
                    format_f64(hist.edges[k + 1]),
                    format_f64(hist.densities[k]),
                ]
            })
            .collect();
        table(b, &["bin_left", "bin_right", "density"], rows)
    })?;
    out.csv("offdiag_stats.csv", |b| {
        table(
            b,
            &["mean", "sd", "skewness", "count"],
            vec![vec![
                format_f64(stats.mean),
                format_f64(stats.sd),
                format_f64(stats.skewness),
                stats.count.to_string(),
            ]],
        )
    })?;
    out.csv("rolling_mean_correlation.csv", |b| {
        let rows = rolling
            .iter()
            .map(|(t, m)| vec![t.clone(), format_f64(*m)])
            .collect();
        table(b, &["window_start", "mean_correlation"], rows)
    })?;
    Ok(json!({
        "n_assets": r.n_assets(),
        "n_observations": r.len(),
        "offdiag_mean": stats.mean,
        "offdiag_sd": stats.sd,
        "offdiag_skewness": stats.skewness,
        "window_length": length,
        "window_step": step,
        "windows": rolling.len(),
    }))
}

pub(crate) fn spectrum(config: &RunConfig, data: &Data, out: &mut Outputs) -> Result<serde_json::Value> {
    let r = &data.panel;
    let c = correlation::correlation(r)?;
    let law = rmt::mp_bounds(q_ratio(r))?;
    let d = rmt::eigendecompose(&c)?;
    let p = rmt::partition(&d, &law);
    let hist = rmt::spectrum_histogram(&d, &law, config.bins)?;
    let simulated = rmt::simulated_max_eigenvalue(r.n_assets(), r.len(), config.seed ^ BASELINE_SEED_MIX)?;
    let ratio = rmt::ratio_to_bound(&d, &law);
    let in_band = d.fraction_in_band(&law, BAND_DELTA);

    out.csv("eigenvalues.csv", |b| d.write_csv(b))?;
    out.csv("spectrum_histogram.csv", |b| hist.write_csv(b))?;
    for label in [
        CorrelationLabel::RandomBand,
        CorrelationLabel::Filtered,
        CorrelationLabel::LargestMode,
    ] {
        let m = p.component(label).expect("spectral component");
        out.csv(&format!("partition_{}.csv", label.as_str()), |b| {
            m.write_csv(b)
        })?;
    }
    let report = [
        ("n_assets", r.n_assets().to_string()),
        ("n_observations", r.len().to_string()),
        ("q", format_f64(law.q)),
        ("lambda_minus", format_f64(law.lambda_minus)),
        ("lambda_plus", format_f64(law.lambda_plus)),
        ("lambda_max", format_f64(d.max_eigenvalue())),
        ("ratio_to_bound", format_f64(ratio)),
        ("simulated_lambda_max", format_f64(simulated)),
        ("ratio_to_simulated", format_f64(d.max_eigenvalue() / simulated)),
        ("deviating_count", p.deviating_indices.len().to_string()),
        ("fraction_in_band", format_f64(in_band)),
    ];
    out.csv("spectrum_report.csv", |b| {
        let header: Vec<&str> = report.iter().map(|(k, _)| *k).collect();
        table(b, &header, vec![report.iter().map(|(_, v)| v.clone()).collect()])
    })?;
    Ok(json!({
        "lambda_minus": law.lambda_minus,
        "lambda_plus": law.lambda_plus,
        "lambda_max": d.max_eigenvalue(),
        "ratio_to_bound": ratio,
        "simulated_lambda_max": simulated,
        "deviating_count": p.deviating_indices.len(),
        "fraction_in_band": in_band,
    }))
}

pub(crate) fn beta(config: &RunConfig, data: &Data, out: &mut Outputs) -> Result<serde_json::Value> {
    let r = &data.panel;
    let market = data.market.as_ref().expect("validated market");
    market.check_aligned(r)?;
    let c = correlation::correlation(r)?;
    let d = rmt::eigendecompose(&c)?;
    let law = rmt::mp_bounds(q_ratio(r))?;
    let options = RegressionOptions {
        standardize: config.standardize_beta,
    };
    let profile = factor::beta_profile_with(r, &d, market, options)?;
    out.csv("beta_profile.csv", |b| factor::write_beta_profile_csv(b, &profile))?;

    if config.residuals {
        let g = panel::standardize(r)?;
        let mut columns = Vec::with_capacity(d.n());
        for k in 0..d.n() {
            let v: Vec<f64> = d.eigenvector(k).iter().copied().collect();
            let series = factor::eigenportfolio_series(&g, &v)?;
            columns.push(factor::residuals(&series, market, options)?);
        }
        let header: Vec<String> = std::iter::once("time".to_string())
            .chain((1..=d.n()).map(|k| format!("e{k}")))
            .collect();
        let rows = (0..r.len())
            .map(|t| {
                std::iter::once(r.times()[t].clone())
                    .chain(columns.iter().map(|col| format_f64(col[t])))
                    .collect()
            })
            .collect();
        out.csv("residuals.csv", |b| {
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            table(b, &header, rows)
        })?;
    }

    let top = profile.last().expect("non-empty profile");
    let mut random: Vec<f64> = profile
        .iter()
        .filter(|e| e.eigenvalue <= law.lambda_plus)
        .map(|e| e.regression.beta.abs())
        .collect();
    random.sort_by(f64::total_cmp);
    let median = match random.len() {
        0 => None,
        k if k % 2 == 1 => Some(random[k / 2]),
        k => Some(0.5 * (random[k / 2 - 1] + random[k / 2])),
    };
    Ok(json!({
        "top_eigenvalue": top.eigenvalue,
        "top_beta": top.regression.beta,
        "top_r_squared": top.regression.r_squared,
        "random_band_median_abs_beta": median,
    }))
}

fn fit_row(variant: &str, relation: &str, fit: &std::result::Result<PowerLawFit, String>) -> Vec<String> {
    match fit {
        Ok(f) => vec![
            variant.to_string(),
            relation.to_string(),
            format_f64(f.gamma),
            format_f64(f.log_intercept),
            format_f64(f.r_squared),
            f.n_points.to_string(),
            f.excluded.to_string(),
            "ok".to_string(),
        ],
        Err(e) => {
            let mut row = vec![variant.to_string(), relation.to_string()];
            row.extend(std::iter::repeat_n(String::new(), 5));
            row.push(e.clone());
            row
        }
    }
}

fn fit_json(fit: &std::result::Result<PowerLawFit, String>) -> serde_json::Value {
    match fit {
        Ok(f) => json!({"status": "ok", "gamma": f.gamma, "r_squared": f.r_squared, "n_points": f.n_points}),
        Err(e) => json!({"status": e}),
    }
}

pub(crate) fn frontier(config: &RunConfig, data: &Data, out: &mut Outputs) -> Result<serde_json::Value> {
    let r = &data.panel;
    let c = correlation::correlation(r)?;
    let q = q_ratio(r);
    let options = FitOptions {
        entropy_floor: config.entropy_floor,
        sigma_range: config.fit_sigma_range(),
    };
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for &variant in &config.corr_variants {
        let name = variant.as_str();
        let built = pipeline::problem_from_parts(r, &c, q, variant, config.diagonal_repair)
            .and_then(|p| efficient_frontier(&p, config.frontier_points));
        let f = match built {
            Ok(f) => f,
            Err(e) => {
                let status = e.status();
                let e = Err(status.clone());
                rows.push(fit_row(name, "entropy_sigma", &e));
                rows.push(fit_row(name, "entropy_mu", &e));
                summary.insert(name.into(), json!({"status": status}));
                continue;
            }
        };
        out.csv(&format!("frontier_{name}.csv"), |b| f.write_csv(b, r.assets(), config.compact))?;
        let sigma_fit = scaling::frontier_fit(&f, config.fit_branch, options).map_err(|e| e.status());
        let mu = scaling::entropy_vs_return(&f, options);
        rows.push(fit_row(name, "entropy_sigma", &sigma_fit));
        rows.push(fit_row(name, "entropy_mu", &mu.fit));
        summary.insert(
            name.into(),
            json!({
                "points": f.len(),
                "entropy_sigma": fit_json(&sigma_fit),
                "entropy_mu": fit_json(&mu.fit),
                "non_positive_mu": mu.non_positive,
            }),
        );
    }
    out.csv("frontier_fits.csv", |b| {
        table(
            b,
            &[
                "variant",
                "relation",
                "gamma",
                "log_intercept",
                "r_squared",
                "n_points",
                "excluded",
                "status",
            ],
            rows,
        )
    })?;
    Ok(serde_json::Value::Object(summary))
}

pub(crate) fn scan(config: &RunConfig, data: &Data, out: &mut Outputs) -> Result<serde_json::Value> {
    let (window_length, step) = window(config, Command::Scan);
    let scan = ScanConfig {
        window_length,
        step,
        corr_variant: config.corr_variants.first().copied().unwrap_or(CorrVariant::Original),
        diagonal_repair: config.diagonal_repair,
        frontier_points: config.frontier_points,
        branch: config.fit_branch,
        fit: FitOptions {
            entropy_floor: config.entropy_floor,
            sigma_range: config.fit_sigma_range(),
        },
    };
    let series = scaling::rolling_exponents(&data.panel, &scan)?;
    out.csv("exponents.csv", |b| series.write_csv(b))?;
    let gammas: Vec<f64> = series
        .entries
        .iter()
        .filter_map(|e| e.fit.as_ref().ok().map(|f| f.gamma))
        .collect();
    Ok(json!({
        "window_length": window_length,
        "window_step": step,
        "windows": series.entries.len(),
        "failed": series.entries.len() - gammas.len(),
        "gamma_min": gammas.iter().copied().reduce(f64::min),
        "gamma_max": gammas.iter().copied().reduce(f64::max),
    }))
}
