use csgp_hedge::backtest::{
    emit_report, run_study, BacktestConfig, MarketData, ReportFormat, COMPARATOR,
};
use csgp_hedge::marketdata::{ForwardQuote, HourlySeries, YearMonth};
use csgp_hedge::synthetic::{generate, SynthConfig};
use std::path::Path;

fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

fn config(first: &str, last: &str, extra: &str) -> BacktestConfig {
    let text = format!(
        "spot = s.csv\ndemand = d.csv\nforwards = f.csv\nstart_month = {first}\nend_month = {last}\n\
         restarts = 1\nmax_iterations = 30\nn_samples = 100\nseed = 3\n{extra}"
    );
    BacktestConfig::parse(&text, Path::new(".")).unwrap()
}

fn market(first: &str, last: &str, seed: u64) -> MarketData {
    let m = generate(&SynthConfig::for_months(ym(first), ym(last), seed)).unwrap();
    MarketData::new(m.spot, &m.demand, m.forwards).unwrap()
}

#[test]
fn flat_spot_at_the_forward_pays_nothing() {
    let month = ym("2016-03");
    let mut data = market("2016-03", "2016-03", 1);
    let price = 48.0;
    let hours = month.hours();
    let values: Vec<f64> = data
        .spot
        .timestamps()
        .iter()
        .zip(data.spot.values())
        .map(|(t, v)| if hours.contains(t) { price } else { *v })
        .collect();
    data.spot =
        HourlySeries::new(data.spot.timestamps().to_vec(), values, data.spot.unit()).unwrap();
    for q in data
        .forwards
        .iter_mut()
        .filter(|q| q.delivery_month == month)
    {
        *q = ForwardQuote::new(month, q.quote_date, price, price).unwrap();
    }
    let report = run_study(&config("2016-03", "2016-03", "sparsity = 0.01"), &data).unwrap();
    let m = &report.months[0];
    assert!(m.skipped.is_none(), "{:?}", m.skipped);
    assert_eq!(m.strategies.len(), 2);
    for s in &m.strategies {
        assert_eq!(s.failure, None);
        assert_eq!(s.payoff_mio_gbp, Some(0.0), "{}", s.strategy);
    }
}

#[test]
fn reports_agree_with_the_monthly_payoffs() {
    let cfg = config("2016-01", "2016-02", "sparsity = 0.01, 0.10\nformat = json");
    let report = run_study(&cfg, &market("2016-01", "2016-02", 2)).unwrap();
    assert_eq!(report.completed_months(), 2);
    assert_eq!(
        report.strategies,
        [COMPARATOR, "csgp_1m_1pct", "csgp_1m_10pct"]
    );

    for (s, total) in report.totals() {
        let sum: f64 = report.months.iter().filter_map(|m| m.payoff(&s)).sum();
        assert!((total - sum).abs() < 1e-9);
    }

    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&report, dir.path(), ReportFormat::Json).unwrap();
    assert_eq!(written.len(), 4);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let cumulative = std::fs::read_to_string(dir.path().join("cumulative.csv")).unwrap();
    let mut lines = cumulative.lines();
    assert_eq!(
        lines.next().unwrap(),
        "month,excess_cum_csgp_1m_1pct,excess_cum_csgp_1m_10pct"
    );
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(last[0], "2016-02");
    let totals = summary["totals"].as_array().unwrap();
    for (i, cell) in last[1..].iter().enumerate() {
        let from_csv: f64 = cell.parse().unwrap();
        let from_json = totals[i + 1]["excess_mio_gbp"].as_f64().unwrap();
        assert!((from_csv - from_json).abs() <= 1e-5 * from_json.abs().max(1e-6));
    }
    assert!(totals[0]["excess_mio_gbp"].is_null());

    let monthly = std::fs::read_to_string(dir.path().join("monthly.csv")).unwrap();
    assert_eq!(
        monthly.lines().next().unwrap(),
        "month,strategy,v_base,v_peak,payoff_mio_gbp"
    );
    assert_eq!(monthly.lines().count(), 1 + 2 * 3);
}

#[test]
fn missing_forward_skips_the_month_with_empty_cells() {
    let mut data = market("2016-01", "2016-02", 4);
    data.forwards.retain(|q| q.delivery_month != ym("2016-02"));
    let report = run_study(&config("2016-01", "2016-02", "sparsity = 0.01"), &data).unwrap();
    assert_eq!(report.completed_months(), 1);
    let skip = report.months[1].skipped.as_deref().unwrap();
    assert!(skip.contains("forward"), "{skip}");

    let monthly = csgp_hedge::backtest::monthly_csv(&report);
    let feb: Vec<&str> = monthly
        .lines()
        .filter(|l| l.starts_with("2016-02"))
        .collect();
    assert!(!feb.is_empty());
    for row in feb {
        assert!(row.ends_with(",,,"), "{row}");
    }
    // the excess carries over the skipped month
    let cum = report.cumulative_excess();
    assert_eq!(cum[0].1, cum[1].1);
}

#[test]
fn single_month_matches_the_same_month_in_a_longer_study() {
    let data = market("2016-01", "2016-02", 5);
    let long = run_study(&config("2016-01", "2016-02", "sparsity = 0.01"), &data).unwrap();
    let one = run_study(&config("2016-02", "2016-02", "sparsity = 0.01"), &data).unwrap();
    assert_eq!(one.months[0], long.months[1]);
}

#[test]
fn short_history_fails_only_the_long_window() {
    // two months of history before 2016-01 is enough for 1M but not 3M
    let mut m = generate(&SynthConfig::for_months(ym("2016-01"), ym("2016-01"), 6)).unwrap();
    let cut = ym("2015-11").first_day().and_hms_opt(0, 0, 0).unwrap();
    let keep: Vec<usize> = (0..m.spot.len())
        .filter(|&i| m.spot.timestamps()[i] >= cut)
        .collect();
    m.spot = HourlySeries::new(
        keep.iter().map(|&i| m.spot.timestamps()[i]).collect(),
        keep.iter().map(|&i| m.spot.values()[i]).collect(),
        m.spot.unit(),
    )
    .unwrap();
    let data = MarketData::new(m.spot, &m.demand, m.forwards).unwrap();
    let cfg = config("2016-01", "2016-01", "sparsity = 0.01\nwindow = 1M, 3M");
    let report = run_study(&cfg, &data).unwrap();
    let month = &report.months[0];
    assert!(month.skipped.is_none(), "{:?}", month.skipped);
    let by_name = |n: &str| month.strategies.iter().find(|s| s.strategy == n).unwrap();
    assert!(by_name("csgp_1m_1pct").payoff_mio_gbp.is_some());
    let long = by_name("csgp_3m_1pct");
    assert!(long.payoff_mio_gbp.is_none());
    assert!(long.failure.is_some());
}
