//! Monthly hedging study: for each delivery month, fit the coregional model
//! on the history before initiation, choose forward positions from its
//! scenarios and score them, and the average-load comparator, on actuals.

mod config;
mod dates;
mod report;
mod run;

pub use config::{BacktestConfig, ReportFormat, Variant, Window};
pub use dates::{default_init_date, rule_init_date};
pub use report::{
    cumulative_csv, emit_report, monthly_csv, report_json, sig6, summary, summary_json, Skip,
    StrategyTotal, Summary, VariantFailure,
};
pub use run::{
    run_month, run_study, run_study_with, variant_seeds, BacktestReport, MarketData, MonthResult,
    StrategyResult, COMPARATOR, SEED_SCHEME,
};
