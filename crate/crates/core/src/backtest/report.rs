use super::config::ReportFormat;
use super::run::{BacktestReport, COMPARATOR};
use crate::error::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// `x` with six significant digits, `%g` style: plain notation for
/// exponents in [-4, 6), scientific otherwise, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..6).contains(&exp) {
        trim(&format!("{:.*}", (5 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

fn round6(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(x)
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round6(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| Error::Numerical(format!("serializing report: {e}")))?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)
        .map_err(|e| Error::Numerical(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn cell(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

/// One row per month and strategy: `month,strategy,v_base,v_peak,payoff_mio_gbp`.
pub fn monthly_csv(report: &BacktestReport) -> String {
    let mut out = String::from("month,strategy,v_base,v_peak,payoff_mio_gbp\n");
    for m in &report.months {
        for s in &report.strategies {
            let row = m.strategies.iter().find(|r| &r.strategy == s);
            let pos = row.and_then(|r| r.position);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                m.month,
                s,
                cell(pos.map(|p| p.v_base)),
                cell(pos.map(|p| p.v_peak)),
                cell(row.and_then(|r| r.payoff_mio_gbp)),
            );
        }
    }
    out
}

/// Cumulative payoff in excess of the comparator per variant.
pub fn cumulative_csv(report: &BacktestReport) -> String {
    let mut out = String::from("month");
    for v in report.variants() {
        let _ = write!(out, ",excess_cum_{v}");
    }
    out.push('\n');
    for (month, acc) in report.cumulative_excess() {
        out.push_str(&month.to_string());
        for a in acc {
            let _ = write!(out, ",{}", sig6(a));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skip {
    pub month: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantFailure {
    pub month: String,
    pub strategy: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyTotal {
    pub strategy: String,
    pub total_mio_gbp: f64,
    /// Total minus the comparator's over months where both exist.
    pub excess_mio_gbp: Option<f64>,
    pub months: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub master_seed: u64,
    pub seed_scheme: String,
    pub months_configured: usize,
    pub months_completed: usize,
    pub totals: Vec<StrategyTotal>,
    pub skipped: Vec<Skip>,
    pub variant_failures: Vec<VariantFailure>,
}

pub fn summary(report: &BacktestReport) -> Summary {
    let last = report.cumulative_excess().last().map(|(_, a)| a.clone());
    let totals = report
        .totals()
        .into_iter()
        .enumerate()
        .map(|(i, (strategy, total))| StrategyTotal {
            months: report
                .months
                .iter()
                .filter(|m| m.payoff(&strategy).is_some())
                .count(),
            excess_mio_gbp: if strategy == COMPARATOR {
                None
            } else {
                Some(last.as_ref().map_or(0.0, |a| a[i - 1]))
            },
            strategy,
            total_mio_gbp: total,
        })
        .collect();
    Summary {
        master_seed: report.master_seed,
        seed_scheme: report.seed_scheme.clone(),
        months_configured: report.months.len(),
        months_completed: report.completed_months(),
        totals,
        skipped: report
            .months
            .iter()
            .filter_map(|m| {
                m.skipped.as_ref().map(|r| Skip {
                    month: m.month.to_string(),
                    reason: r.clone(),
                })
            })
            .collect(),
        variant_failures: report
            .months
            .iter()
            .flat_map(|m| {
                m.strategies.iter().filter_map(move |s| {
                    s.failure.as_ref().map(|r| VariantFailure {
                        month: m.month.to_string(),
                        strategy: s.strategy.clone(),
                        reason: r.clone(),
                    })
                })
            })
            .collect(),
    }
}

pub fn summary_json(report: &BacktestReport) -> Result<String> {
    to_json(&summary(report))
}

/// Full per-month detail, including seeds, fit and optimizer diagnostics.
pub fn report_json(report: &BacktestReport) -> Result<String> {
    to_json(report)
}

/// Writes `monthly.csv`, `cumulative.csv` and `summary.json` into `dir`, plus
/// `report.json` for the json format. Returns the written paths.
pub fn emit_report(
    report: &BacktestReport,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("monthly.csv", monthly_csv(report)),
        ("cumulative.csv", cumulative_csv(report)),
        ("summary.json", summary_json(report)?),
    ];
    if format == ReportFormat::Json {
        files.push(("report.json", report_json(report)?));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_examples() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-2.91), "-2.91");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.0000123456), "1.23456e-5");
        assert_eq!(sig6(0.000123456), "0.000123456");
        assert_eq!(sig6(5.42), "5.42");
    }

    #[test]
    fn sig6_roundtrips_to_six_digits() {
        for x in [1.2345678, -0.00271828, 6.02214076e23, 1.0 / 3.0, 42.0] {
            let y: f64 = sig6(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 5e-6, "{x} -> {y}");
        }
    }

    #[test]
    fn json_floats_are_rounded() {
        let s =
            to_json(&serde_json::json!({"a": 0.123456789, "b": [2.0f64 / 3.0], "n": 7})).unwrap();
        assert!(s.contains("0.123457") && s.contains("0.666667") && s.contains("\"n\": 7"));
    }
}
