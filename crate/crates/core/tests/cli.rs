use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rmt_portfolio::correlation::correlation;
use rmt_portfolio::factor::eigenportfolio_series;
use rmt_portfolio::panel::{self, Layout, ReturnKind};
use rmt_portfolio::rmt::eigendecompose;
use tempfile::TempDir;

fn rmtp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmtp"))
        .args(args)
        .output()
        .expect("spawn rmtp")
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of an output CSV, header included, comment line dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# rmtp "));
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let r = rows(path);
    let k = r[0].iter().position(|h| h == name).unwrap();
    r[1..].iter().map(|row| row[k].clone()).collect()
}

fn write_prices(path: &Path, names: &[&str], series: &[Vec<f64>]) {
    let mut text = format!("date,{}\n", names.join(","));
    for t in 0..series[0].len() {
        let cells: Vec<String> = series.iter().map(|p| format!("{:?}", p[t])).collect();
        text += &format!("{},{}\n", t, cells.join(","));
    }
    fs::write(path, text).unwrap();
}

fn prices_from_returns(returns: &[f64]) -> Vec<f64> {
    let mut p = vec![100.0];
    for r in returns {
        let last = *p.last().unwrap();
        p.push(last * r.exp());
    }
    p
}

#[test]
fn corr_on_bundled_sample() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&["corr", "--input", s(&sample("sample_prices.csv")), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "correlation.csv",
            "offdiag_histogram.csv",
            "offdiag_stats.csv",
            "rolling_mean_correlation.csv",
            "run_summary.json"
        ]
    );
    let c = rows(&out.join("correlation.csv"));
    assert_eq!(c.len(), 6);
    assert_eq!(c[0], ["asset", "ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO"]);
    // 320 returns, windows of 250 every 21
    assert_eq!(column(&out.join("rolling_mean_correlation.csv"), "window_start").len(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "corr");
    assert_eq!(summary["outputs"].as_array().unwrap().len(), 4);
    let header = fs::read_to_string(out.join("offdiag_stats.csv")).unwrap();
    let hash = summary["config_hash"].as_str().unwrap();
    assert!(header.starts_with(&format!("# rmtp {} config={hash}\n", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn missing_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = dir.path().join("out");
    let o = rmtp(&["corr", "--input", s(&missing), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_cell_error_names_location() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("p.csv");
    fs::write(&input, "date,A,B\n1,1,2\n2,abc,3\n3,2,4\n").unwrap();
    let o = rmtp(&["spectrum", "--input", s(&input), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
    let e = stderr(&o);
    assert!(e.contains("row 3") && e.contains("column 2") && e.contains("abc"), "{e}");
}

#[test]
fn large_synthetic_correlation() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&[
        "corr",
        "--synthetic",
        "iid:n=473,l=2845",
        "--set",
        "window_step=500",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = rows(&out.join("correlation.csv"));
    assert_eq!(c.len(), 474);
    assert!(c.iter().all(|r| r.len() == 474));
}

#[test]
fn iid_spectrum_report_ratio() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&["spectrum", "--synthetic", "iid:n=200,l=800", "--seed", "5", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = out.join("spectrum_report.csv");
    let ratio: f64 = column(&report, "ratio_to_bound")[0].parse().unwrap();
    assert!((0.9..=1.2).contains(&ratio), "{ratio}");
    for f in [
        "eigenvalues.csv",
        "spectrum_histogram.csv",
        "partition_random_band.csv",
        "partition_filtered.csv",
        "partition_largest_mode.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(column(&out.join("eigenvalues.csv"), "eigenvalue").len(), 200);
}

#[test]
fn orthogonal_returns_give_unit_spectrum() {
    // Walsh patterns: zero mean, mutually orthogonal, so the correlation
    // matrix is exactly the identity.
    let walsh = |k: usize, t: usize| if (k & t).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let series: Vec<Vec<f64>> = (1..=3)
        .map(|k| prices_from_returns(&(0..8).map(|t| 0.01 * walsh(k, t)).collect::<Vec<_>>()))
        .collect();
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("walsh.csv");
    write_prices(&input, &["A", "B", "C"], &series);
    let out = dir.path().join("out");
    let o = rmtp(&["spectrum", "--input", s(&input), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for v in column(&out.join("eigenvalues.csv"), "eigenvalue") {
        assert!((v.parse::<f64>().unwrap() - 1.0).abs() < 1e-10, "{v}");
    }
}

#[test]
fn one_factor_spectrum_deviates() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&["spectrum", "--synthetic", "one-factor:n=60,l=600,beta=0.5:1.5,noise=1", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let count: usize = column(&out.join("spectrum_report.csv"), "deviating_count")[0].parse().unwrap();
    assert!(count >= 1);
}

#[test]
fn eigenportfolio_market_has_unit_beta() {
    let input = sample("sample_prices.csv");
    let prices = panel::load_csv(&input, Layout::RowsAreDates).unwrap();
    let r = panel::to_returns(&prices, ReturnKind::Log);
    let d = eigendecompose(&correlation(&r).unwrap()).unwrap();
    let k = 2;
    let v: Vec<f64> = d.eigenvector(k).iter().copied().collect();
    let series = eigenportfolio_series(&r, &v).unwrap();
    let market = prices_from_returns(&series);
    let dir = TempDir::new().unwrap();
    let mpath = dir.path().join("m.csv");
    let mut text = String::from("date,M\n");
    for (t, p) in prices.times().iter().zip(&market) {
        text += &format!("{t},{p:?}\n");
    }
    fs::write(&mpath, text).unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&["beta", "--input", s(&input), "--market", s(&mpath), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let betas: Vec<f64> = column(&out.join("beta_profile.csv"), "beta")
        .iter()
        .map(|b| b.parse().unwrap())
        .collect();
    assert!((betas[k] - 1.0).abs() < 1e-9, "{betas:?}");
}

#[test]
fn misaligned_market_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let mpath = dir.path().join("m.csv");
    let text = fs::read_to_string(sample("sample_market.csv")).unwrap();
    let shifted: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 5 { l.replacen("2001-01", "2001-00", 1) } else { l.to_string() })
        .map(|l| l + "\n")
        .collect();
    fs::write(&mpath, shifted).unwrap();
    let o = rmtp(&[
        "beta",
        "--input",
        s(&sample("sample_prices.csv")),
        "--market",
        s(&mpath),
        "--out-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn beta_needs_a_market() {
    let dir = TempDir::new().unwrap();
    let o = rmtp(&["beta", "--input", s(&sample("sample_prices.csv")), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = rmtp(&["beta", "--synthetic", "iid:n=5,l=50", "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn one_factor_beta_peaks_at_top_eigenvalue() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&[
        "beta",
        "--synthetic",
        "one-factor:n=40,l=1000,beta=0.5:1.5,noise=1",
        "--set",
        "residuals=true",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let betas: Vec<f64> = column(&out.join("beta_profile.csv"), "beta")
        .iter()
        .map(|b| b.parse::<f64>().unwrap().abs())
        .collect();
    let top = betas.iter().copied().fold(0.0, f64::max);
    assert_eq!(betas[39], top);
    let res = rows(&out.join("residuals.csv"));
    assert_eq!((res.len(), res[0].len()), (1001, 41));
}

#[test]
fn unstandardized_beta_keeps_sign_and_changes_scale() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, standardize: &str| {
        let out = dir.path().join(name);
        let o = rmtp(&[
            "beta",
            "--synthetic",
            "one-factor:n=20,l=600,beta=0.5:1.5,noise=1",
            "--set",
            &format!("standardize_beta={standardize}"),
            "--out-dir",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let summary = std::fs::read_to_string(out.join("run_summary.json")).unwrap();
        assert!(summary.contains(&format!("\"standardize_beta\": \"{standardize}\"")));
        column(&out.join("beta_profile.csv"), "beta")
            .iter()
            .map(|b| b.parse::<f64>().unwrap())
            .collect::<Vec<_>>()
    };
    let standardized = run("std", "true");
    let raw = run("raw", "false");
    assert!(standardized.iter().all(|b| b.abs() <= 1.0 + 1e-12));
    for (a, b) in standardized.iter().zip(&raw) {
        assert!(a * b >= 0.0);
    }
    assert!(standardized.iter().zip(&raw).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn frontier_variants_and_fit_records() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&[
        "frontier",
        "--synthetic",
        "one-factor:n=30,l=600,beta=0.5:1.5,noise=1",
        "--set",
        "corr_variant=original,random_band,filtered",
        "--set",
        "frontier_points=40",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for v in ["original", "random_band", "filtered"] {
        let f = rows(&out.join(format!("frontier_{v}.csv")));
        assert_eq!(f.len(), 41);
        assert_eq!(&f[0][..3], ["target_mu", "achieved_sigma", "entropy"]);
        assert_eq!(f[0].len(), 33);
    }
    let fits = rows(&out.join("frontier_fits.csv"));
    assert_eq!(fits.len(), 7);
    assert!(fits[1..].iter().all(|r| r[7] == "ok"), "{fits:?}");
}

#[test]
fn compact_frontier_drops_weights() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&[
        "frontier",
        "--synthetic",
        "iid:n=6,l=100",
        "--set",
        "compact=yes",
        "--set",
        "frontier_points=10",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&out.join("frontier_original.csv"))[0].len(), 3);
}

#[test]
fn single_asset_frontier() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("one.csv");
    write_prices(&input, &["ONLY"], &[vec![10.0, 11.0, 10.5, 10.8, 11.2]]);
    let out = dir.path().join("out");
    let o = rmtp(&["frontier", "--input", s(&input), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = rows(&out.join("frontier_original.csv"));
    assert_eq!(f.len(), 2);
    assert_eq!(f[1][3], "1.0");
}

#[test]
fn empty_sigma_range_records_status() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&[
        "frontier",
        "--synthetic",
        "iid:n=8,l=200",
        "--set",
        "fit_sigma_min=1000",
        "--set",
        "fit_sigma_max=2000",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let status = column(&out.join("frontier_fits.csv"), "status");
    assert!(status[0].starts_with("InsufficientPoints"), "{status:?}");
}

#[test]
fn scan_entry_count() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&[
        "scan",
        "--synthetic",
        "one-factor:n=15,l=700",
        "--set",
        "frontier_points=30",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let starts = column(&out.join("exponents.csv"), "window_start");
    assert_eq!(starts.len(), (700 - 500) / 20 + 1);
}

#[test]
fn window_longer_than_panel_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = rmtp(&["scan", "--synthetic", "iid:n=5,l=300", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("window_length"));
    // Only known once the file is read.
    let o = rmtp(&["scan", "--input", s(&sample("sample_prices.csv")), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(&cfg, "synthetic = iid:n=20,l=300\nwindow_length = 100\nwindow_step = 50\nseed = 3\n").unwrap();
    let o = rmtp(&["corr", "--config", s(&cfg), "--set", "window_step=100", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&out.join("rolling_mean_correlation.csv"), "window_start").len(), 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], "3");
    assert_eq!(summary["config"]["window_step"], "100");

    fs::write(&cfg, "synthetic = iid:n=20,l=300\nwindow_size = 100\n").unwrap();
    let o = rmtp(&["corr", "--config", s(&cfg), "--out-dir", s(&dir.path().join("o2"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("window_size"));
    let o = rmtp(&["corr", "--synthetic", "iid:n=20", "--out-dir", s(&dir.path().join("o3"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = rmtp(&[
            "frontier",
            "--synthetic",
            "one-factor:n=12,l=300",
            "--seed",
            "9",
            "--set",
            "corr_variant=original,random_band",
            "--out-dir",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for e in fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}
