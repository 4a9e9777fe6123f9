use crate::error::{Error, Result};
use crate::kernels::{CompositeConfig, LeafKind};
use crate::marketdata::YearMonth;
use chrono::NaiveDate;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Training history of `months x 720` hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Window {
    pub months: u32,
}

impl Window {
    pub fn hours(self) -> i64 {
        720 * self.months as i64
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}M", self.months)
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let months = s
            .strip_suffix(['M', 'm'])
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|n| (1..=3).contains(n))
            .ok_or_else(|| Error::Config(format!("window must be 1M, 2M or 3M, got '{s}'")))?;
        Ok(Window { months })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!(
                "format must be csv or json, got '{other}'"
            ))),
        }
    }
}

/// One model configuration run over every month.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub window: Window,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub spot: PathBuf,
    pub demand: PathBuf,
    pub forwards: PathBuf,
    pub out_dir: PathBuf,
    pub start_month: YearMonth,
    pub end_month: YearMonth,
    pub windows: Vec<Window>,
    pub sparsities: Vec<f64>,
    pub kernel: CompositeConfig,
    pub kernel_drop: Vec<LeafKind>,
    pub restarts: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub retailer_share: f64,
    pub format: ReportFormat,
    pub max_iterations: usize,
    pub payoff_scale: f64,
    pub optimizer_grid: usize,
    pub init_dates: BTreeMap<YearMonth, NaiveDate>,
}

const KEYS: &[&str] = &[
    "spot",
    "demand",
    "forwards",
    "out_dir",
    "start_month",
    "end_month",
    "window",
    "sparsity",
    "kernel_drop",
    "restarts",
    "n_samples",
    "seed",
    "retailer_share",
    "format",
    "max_iterations",
    "payoff_scale",
    "optimizer_grid",
];

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn sparsity_label(s: f64) -> String {
    let pct = format!("{:.4}", s * 100.0);
    let pct = pct.trim_end_matches('0').trim_end_matches('.');
    format!("{pct}pct")
}

impl BacktestConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        let mut init_dates = BTreeMap::new();
        let mut kernel_inits: Vec<(LeafKind, String, f64)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(m) = k.strip_prefix("init.") {
                let month: YearMonth = m.parse()?;
                let date = NaiveDate::parse_from_str(v, "%Y-%m-%d")
                    .map_err(|_| Error::Config(format!("{k}: bad date '{v}'")))?;
                init_dates.insert(month, date);
            } else if let Some(rest) = k.strip_prefix("kernel.") {
                let (leaf, field) = rest
                    .split_once('.')
                    .ok_or_else(|| Error::Config(format!("unknown key '{k}'")))?;
                let leaf: LeafKind = leaf
                    .parse()
                    .map_err(|_| Error::Config(format!("unknown kernel leaf in '{k}'")))?;
                if !["amplitude", "lengthscale", "shape"].contains(&field) {
                    return Err(Error::Config(format!("unknown key '{k}'")));
                }
                kernel_inits.push((leaf, field.to_string(), num(k, v)?));
            } else if KEYS.contains(&k) {
                if values.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(Error::Config(format!("key '{k}' given twice")));
                }
            } else {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
        }
        let get = |k: &str| values.get(k).map(String::as_str);
        let required =
            |k: &str| get(k).ok_or_else(|| Error::Config(format!("missing required key '{k}'")));
        let path = |v: &str| base_dir.join(v);

        let kernel_drop: Vec<LeafKind> = match get("kernel_drop") {
            Some(v) => list(v)
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::Config(format!("kernel_drop: unknown leaf '{s}'")))
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let mut kernel = CompositeConfig::without(&kernel_drop);
        if kernel.leaves.is_empty() {
            return Err(Error::Config("kernel_drop removes every leaf".into()));
        }
        for (leaf, field, value) in kernel_inits {
            if let Some((_, init)) = kernel.leaves.iter_mut().find(|(k, _)| *k == leaf) {
                match field.as_str() {
                    "amplitude" => init.amplitude = value,
                    "lengthscale" => init.lengthscale = value,
                    _ => init.shape = value,
                }
            }
        }
        crate::kernels::composite_kernel(&kernel)?;

        let config = BacktestConfig {
            spot: path(required("spot")?),
            demand: path(required("demand")?),
            forwards: path(required("forwards")?),
            out_dir: path(get("out_dir").unwrap_or("out")),
            start_month: required("start_month")?.parse()?,
            end_month: required("end_month")?.parse()?,
            windows: match get("window") {
                Some(v) => list(v).map(str::parse).collect::<Result<_>>()?,
                None => vec![Window { months: 1 }],
            },
            sparsities: match get("sparsity") {
                Some(v) => list(v).map(|s| num("sparsity", s)).collect::<Result<_>>()?,
                None => vec![0.01, 0.10],
            },
            kernel,
            kernel_drop,
            restarts: get("restarts").map_or(Ok(5), |v| num("restarts", v))?,
            n_samples: get("n_samples").map_or(Ok(1000), |v| num("n_samples", v))?,
            seed: get("seed").map_or(Ok(0), |v| num("seed", v))?,
            retailer_share: get("retailer_share")
                .map_or(Ok(0.015), |v| num("retailer_share", v))?,
            format: get("format").map_or(Ok(ReportFormat::Csv), str::parse)?,
            max_iterations: get("max_iterations").map_or(Ok(200), |v| num("max_iterations", v))?,
            payoff_scale: get("payoff_scale")
                .map_or(Ok(crate::hedge::PAYOFF_SCALE), |v| num("payoff_scale", v))?,
            optimizer_grid: get("optimizer_grid").map_or(Ok(21), |v| num("optimizer_grid", v))?,
            init_dates,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        BacktestConfig::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_month < self.start_month {
            return Err(Error::Config("end_month precedes start_month".into()));
        }
        if self.windows.is_empty() || self.sparsities.is_empty() {
            return Err(Error::Config(
                "window and sparsity lists must be nonempty".into(),
            ));
        }
        if let Some(s) = self.sparsities.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return Err(Error::Config(format!("sparsity {s} outside (0, 1]")));
        }
        if self.restarts == 0 || self.n_samples == 0 || self.max_iterations == 0 {
            return Err(Error::Config(
                "restarts, n_samples and max_iterations must be positive".into(),
            ));
        }
        if !(self.retailer_share > 0.0 && self.retailer_share <= 1.0) {
            return Err(Error::Config(format!(
                "retailer_share {} outside (0, 1]",
                self.retailer_share
            )));
        }
        if !(self.payoff_scale > 0.0 && self.payoff_scale.is_finite()) {
            return Err(Error::Config("payoff_scale must be positive".into()));
        }
        if self.optimizer_grid < 2 {
            return Err(Error::Config("optimizer_grid must be at least 2".into()));
        }
        let variants = self.variants();
        if variants.len() > 16 {
            return Err(Error::Config(
                "at most 16 window x sparsity variants".into(),
            ));
        }
        for (i, a) in variants.iter().enumerate() {
            if variants[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::Config(format!("variant {} listed twice", a.label)));
            }
        }
        for (m, d) in &self.init_dates {
            if *d >= m.first_day() {
                return Err(Error::Config(format!(
                    "initiation date {d} is not before {m}"
                )));
            }
        }
        Ok(())
    }

    pub fn months(&self) -> Vec<YearMonth> {
        YearMonth::range(self.start_month, self.end_month)
    }

    /// Every window x sparsity combination, window-major.
    pub fn variants(&self) -> Vec<Variant> {
        let drop = if self.kernel_drop.is_empty() {
            String::new()
        } else {
            let names: Vec<String> = self.kernel_drop.iter().map(|k| k.to_string()).collect();
            format!("_no_{}", names.join("_"))
        };
        self.windows
            .iter()
            .flat_map(|w| self.sparsities.iter().map(move |s| (w, s)))
            .map(|(w, s)| Variant {
                label: format!(
                    "csgp_{}_{}{}",
                    w.to_string().to_lowercase(),
                    sparsity_label(*s),
                    drop
                ),
                window: *w,
                sparsity: *s,
            })
            .collect()
    }

    pub fn init_date(&self, month: YearMonth) -> NaiveDate {
        self.init_dates
            .get(&month)
            .copied()
            .unwrap_or_else(|| super::dates::default_init_date(month))
    }
}
