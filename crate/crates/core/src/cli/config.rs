//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::panel::{Layout, RegimeShift, ReturnKind};
use crate::pipeline::CorrVariant;
use crate::scaling::{Branch, DEFAULT_ENTROPY_FLOOR};

/// Generator named by a `--synthetic` string such as
/// `one-factor:n=50,l=2000,beta=0.5:1.5,noise=1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticSpec {
    Iid {
        n: usize,
        l: usize,
    },
    OneFactor {
        n: usize,
        l: usize,
        beta: (f64, f64),
        noise: f64,
    },
    Regime(RegimeShift),
}

impl SyntheticSpec {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            SyntheticSpec::Iid { n, l } | SyntheticSpec::OneFactor { n, l, .. } => (*n, *l),
            SyntheticSpec::Regime(r) => (r.n, r.l),
        }
    }

    pub fn has_market(&self) -> bool {
        !matches!(self, SyntheticSpec::Iid { .. })
    }
}

fn parse_pair(value: &str) -> Result<(f64, f64), String> {
    let (a, b) = value
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got `{value}`"))?;
    Ok((parse_num(a)?, parse_num(b)?))
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("invalid number `{value}`"))
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in `{part}`"))?;
            if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(format!("duplicate generator field `{}`", k.trim()));
            }
        }
        let mut take = |key: &str| fields.remove(key);
        let required = |v: Option<String>, key: &str| {
            v.ok_or_else(|| format!("generator `{kind}` needs `{key}`"))
        };
        let n = parse_num(&required(take("n"), "n")?)?;
        let l = parse_num(&required(take("l"), "l")?)?;
        let spec = match kind.trim() {
            "iid" => SyntheticSpec::Iid { n, l },
            "one-factor" => SyntheticSpec::OneFactor {
                n,
                l,
                beta: take("beta").map_or(Ok((0.5, 1.5)), |v| parse_pair(&v))?,
                noise: take("noise").map_or(Ok(1.0), |v| parse_num(&v))?,
            },
            "regime" => {
                let mut r = RegimeShift::centered(n, l);
                if let Some(v) = take("spike") {
                    let (a, b) = v
                        .split_once(':')
                        .ok_or_else(|| format!("expected start:end, got `{v}`"))?;
                    r.spike = (parse_num(a)?, parse_num(b)?);
                }
                if let Some(v) = take("calm") {
                    r.calm_rho = parse_num(&v)?;
                }
                if let Some(v) = take("peak") {
                    r.spike_rho = parse_num(&v)?;
                }
                if let Some(v) = take("beta") {
                    r.beta_range = parse_pair(&v)?;
                }
                if let Some(v) = take("noise") {
                    r.noise_sd = parse_num(&v)?;
                }
                SyntheticSpec::Regime(r)
            }
            other => {
                return Err(format!(
                    "unknown generator `{other}` (expected iid, one-factor or regime)"
                ))
            }
        };
        if let Some(k) = fields.keys().next() {
            return Err(format!("unknown field `{k}` for generator `{}`", kind.trim()));
        }
        Ok(spec)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticSpec::Iid { n, l } => write!(f, "iid:n={n},l={l}"),
            SyntheticSpec::OneFactor { n, l, beta, noise } => write!(
                f,
                "one-factor:n={n},l={l},beta={}:{},noise={noise}",
                beta.0, beta.1
            ),
            SyntheticSpec::Regime(r) => write!(
                f,
                "regime:n={},l={},spike={}:{},calm={},peak={},beta={}:{},noise={}",
                r.n,
                r.l,
                r.spike.0,
                r.spike.1,
                r.calm_rho,
                r.spike_rho,
                r.beta_range.0,
                r.beta_range.1,
                r.noise_sd
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub market: Option<PathBuf>,
    pub layout: Layout,
    pub returns: ReturnKind,
    /// Unset means the subcommand default.
    pub window_length: Option<usize>,
    pub window_step: Option<usize>,
    pub corr_variants: Vec<CorrVariant>,
    pub diagonal_repair: bool,
    pub frontier_points: usize,
    pub fit_branch: Branch,
    pub fit_sigma_min: Option<f64>,
    pub fit_sigma_max: Option<f64>,
    pub entropy_floor: f64,
    pub bins: usize,
    pub compact: bool,
    pub residuals: bool,
    /// Standardize eigenportfolio and market series before the beta fit.
    pub standardize_beta: bool,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            synthetic: None,
            market: None,
            layout: Layout::RowsAreDates,
            returns: ReturnKind::Log,
            window_length: None,
            window_step: None,
            corr_variants: vec![CorrVariant::Original],
            diagonal_repair: true,
            frontier_points: 100,
            fit_branch: Branch::Upper,
            fit_sigma_min: None,
            fit_sigma_max: None,
            entropy_floor: DEFAULT_ENTROPY_FLOOR,
            bins: 50,
            compact: false,
            residuals: false,
            standardize_beta: true,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "bins",
    "compact",
    "corr_variant",
    "diagonal_repair",
    "entropy_floor",
    "fit_branch",
    "fit_sigma_max",
    "fit_sigma_min",
    "frontier_points",
    "input",
    "layout",
    "market",
    "out_dir",
    "residuals",
    "returns",
    "seed",
    "standardize_beta",
    "synthetic",
    "window_length",
    "window_step",
];

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

fn positive(value: &str) -> Result<usize, String> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("expected a positive integer, got `{value}`")),
    }
}

fn optional<T>(value: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, String> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Apply one setting. Errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let result = match key {
            "input" => {
                self.input = optional_path(value);
                Ok(())
            }
            "synthetic" => {
                self.synthetic = if value.is_empty() {
                    None
                } else {
                    Some(value.parse()?)
                };
                Ok(())
            }
            "market" => {
                self.market = optional_path(value);
                Ok(())
            }
            "out_dir" => {
                self.out_dir = PathBuf::from(value);
                Ok(())
            }
            "layout" => value.parse().map(|v| self.layout = v),
            "returns" => value.parse().map(|v| self.returns = v),
            "window_length" => optional(value, positive).map(|v| self.window_length = v),
            "window_step" => optional(value, positive).map(|v| self.window_step = v),
            "corr_variant" => value
                .split(',')
                .map(|v| v.trim().parse::<CorrVariant>())
                .collect::<Result<Vec<_>, _>>()
                .map(|v| self.corr_variants = v),
            "diagonal_repair" => parse_bool(value).map(|v| self.diagonal_repair = v),
            "frontier_points" => positive(value).map(|v| self.frontier_points = v),
            "fit_branch" => value.parse().map(|v| self.fit_branch = v),
            "fit_sigma_min" => optional(value, parse_num).map(|v| self.fit_sigma_min = v),
            "fit_sigma_max" => optional(value, parse_num).map(|v| self.fit_sigma_max = v),
            "entropy_floor" => parse_num(value).map(|v| self.entropy_floor = v),
            "bins" => positive(value).map(|v| self.bins = v),
            "compact" => parse_bool(value).map(|v| self.compact = v),
            "residuals" => parse_bool(value).map(|v| self.residuals = v),
            "standardize_beta" => parse_bool(value).map(|v| self.standardize_beta = v),
            "seed" => value
                .parse()
                .map(|v| self.seed = v)
                .map_err(|_| format!("expected an unsigned integer, got `{value}`")),
            _ => return Err(format!("unknown config key `{key}`")),
        };
        result.map_err(|e| format!("config key `{key}`: {e}"))
    }

    /// Apply a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<(), String> {
        let mut seen = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = || format!("{}:{}", origin.display(), k + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}: expected `key = value`", at()))?;
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), k + 1) {
                return Err(format!("{}: key `{key}` already set on line {first}", at()));
            }
            self.set(key, value).map_err(|e| format!("{}: {e}", at()))?;
        }
        Ok(())
    }

    /// Every key with its resolved value, in key order. Unset optional keys
    /// have an empty value.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let num = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let real = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        let variants: Vec<&str> = self.corr_variants.iter().map(|v| v.as_str()).collect();
        let mut m = BTreeMap::new();
        m.insert("bins", self.bins.to_string());
        m.insert("compact", self.compact.to_string());
        m.insert("corr_variant", variants.join(","));
        m.insert("diagonal_repair", self.diagonal_repair.to_string());
        m.insert("entropy_floor", format!("{:?}", self.entropy_floor));
        m.insert(
            "fit_branch",
            match self.fit_branch {
                Branch::Upper => "upper",
                Branch::All => "all",
            }
            .to_string(),
        );
        m.insert("fit_sigma_max", real(self.fit_sigma_max));
        m.insert("fit_sigma_min", real(self.fit_sigma_min));
        m.insert("frontier_points", self.frontier_points.to_string());
        m.insert("input", path(&self.input));
        m.insert(
            "layout",
            match self.layout {
                Layout::RowsAreDates => "rows-are-dates",
                Layout::RowsAreAssets => "rows-are-assets",
            }
            .to_string(),
        );
        m.insert("market", path(&self.market));
        m.insert("out_dir", self.out_dir.display().to_string());
        m.insert("residuals", self.residuals.to_string());
        m.insert("standardize_beta", self.standardize_beta.to_string());
        m.insert(
            "returns",
            match self.returns {
                ReturnKind::Log => "log",
                ReturnKind::Simple => "simple",
            }
            .to_string(),
        );
        m.insert("seed", self.seed.to_string());
        m.insert(
            "synthetic",
            self.synthetic.as_ref().map(|s| s.to_string()).unwrap_or_default(),
        );
        m.insert("window_length", num(self.window_length));
        m.insert("window_step", num(self.window_step));
        m
    }

    /// `entries` without `out_dir`, which does not affect any result.
    pub fn run_entries(&self) -> BTreeMap<&'static str, String> {
        let mut m = self.entries();
        m.remove("out_dir");
        m
    }

    /// SHA-256 over the canonical `key=value` lines, leaving out `out_dir`
    /// so the same run into two directories hashes identically.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.run_entries() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn fit_sigma_range(&self) -> Option<(f64, f64)> {
        match (self.fit_sigma_min, self.fit_sigma_max) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(0.0), hi.unwrap_or(f64::INFINITY))),
        }
    }
}
