use super::config::{BacktestConfig, Variant};
use crate::error::{Error, Result};
use crate::gp::{
    fit, sample_posterior_scenarios, select_inducing, FitOptions, GpModel, LbfgsOptions,
    TrainingSet,
};
use crate::hedge::{
    average_load_positions, optimize_positions, realized_payoff, HedgeTerms, Loss,
    OptimizerOptions, Position, ScenarioSet,
};
use crate::kernels::{composite_kernel, CoregionalSpec};
use crate::marketdata::{
    cap_spikes, classify_hour, demand_to_load, forward_asof, hour_range, normalize_load,
    read_demand_csv, read_forwards_csv, read_spot_csv, ForwardQuote, HourClass, HourlySeries,
    RawDemandSeries, YearMonth,
};
use chrono::{Duration, NaiveDate, NaiveDateTime};
use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

pub const COMPARATOR: &str = "average_load";

/// Everything a backtest reads: hourly spot, hourly load (MWh) and forward
/// quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub spot: HourlySeries,
    pub load: HourlySeries,
    pub forwards: Vec<ForwardQuote>,
}

impl MarketData {
    /// Load hours that cannot be formed are left out; months touching them
    /// are skipped later.
    pub fn new(
        spot: HourlySeries,
        demand: &RawDemandSeries,
        forwards: Vec<ForwardQuote>,
    ) -> Result<Self> {
        Ok(MarketData {
            spot,
            load: demand_to_load(demand)?.load,
            forwards,
        })
    }

    pub fn load(config: &BacktestConfig) -> Result<Self> {
        MarketData::new(
            read_spot_csv(&config.spot)?,
            &read_demand_csv(&config.demand)?,
            read_forwards_csv(&config.forwards)?,
        )
    }

    /// Largest load strictly before `t`.
    pub fn max_load_before(&self, t: NaiveDateTime) -> Option<f64> {
        let n = self.load.timestamps().partition_point(|h| *h < t);
        self.load.values()[..n].iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyResult {
    pub strategy: String,
    pub position: Option<Position>,
    pub payoff_mio_gbp: Option<f64>,
    /// Why this strategy has no result for the month.
    pub failure: Option<String>,
    pub fit_seed: Option<u64>,
    pub sample_seed: Option<u64>,
    pub log_marginal_likelihood: Option<f64>,
    pub inducing_points: Option<usize>,
    pub price_caps: Option<usize>,
    pub load_caps: Option<usize>,
    pub optimizer_converged: Option<bool>,
    /// Comparator only: mean peak load was below mean off-peak load.
    pub clamped: Option<bool>,
}

impl StrategyResult {
    fn empty(strategy: &str) -> Self {
        StrategyResult {
            strategy: strategy.to_string(),
            position: None,
            payoff_mio_gbp: None,
            failure: None,
            fit_seed: None,
            sample_seed: None,
            log_marginal_likelihood: None,
            inducing_points: None,
            price_caps: None,
            load_caps: None,
            optimizer_converged: None,
            clamped: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthResult {
    pub month: YearMonth,
    pub init_date: NaiveDate,
    pub forward: Option<ForwardQuote>,
    pub global_max: Option<f64>,
    /// Set when the whole month was skipped.
    pub skipped: Option<String>,
    /// Comparator first, then the model variants in configuration order.
    pub strategies: Vec<StrategyResult>,
}

impl MonthResult {
    pub fn payoff(&self, strategy: &str) -> Option<f64> {
        self.strategies
            .iter()
            .find(|s| s.strategy == strategy)
            .and_then(|s| s.payoff_mio_gbp)
    }
}

/// Fit and sample seeds of one (month, variant): ChaCha20 keyed by the master
/// seed on stream `month_index * 16 + variant_index`, where `month_index`
/// counts months since year 0.
pub fn variant_seeds(master: u64, month: YearMonth, variant_index: usize) -> (u64, u64) {
    let month_index = month.year as i64 * 12 + month.month as i64 - 1;
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream((month_index as u64).wrapping_mul(16) + variant_index as u64);
    (rng.next_u64(), rng.next_u64())
}

pub const SEED_SCHEME: &str =
    "chacha20(seed).stream(month_index*16+variant_index); month_index=year*12+month-1";

/// Starting model in original units: cross-task weights of half an SD, a tenth of
/// each task's variance as noise.
fn initial_model(config: &BacktestConfig, train: &TrainingSet) -> Result<GpModel> {
    let sd: Vec<f64> = train.task_moments().iter().map(|(_, s)| *s).collect();
    let w = DMatrix::from_fn(2, 1, |i, _| 0.5 * sd[i]);
    let kappa = sd.iter().map(|s| 0.5 * s * s).collect();
    let noise = sd.iter().map(|s| 0.1 * s * s).collect();
    GpModel::new(
        composite_kernel(&config.kernel)?,
        CoregionalSpec::new(w, kappa)?,
        noise,
    )
}

struct MonthContext<'a> {
    month: YearMonth,
    init: NaiveDateTime,
    terms: HedgeTerms,
    global_max: f64,
    actual_load: &'a HourlySeries,
}

fn run_variant(
    config: &BacktestConfig,
    data: &MarketData,
    ctx: &MonthContext,
    variant: &Variant,
    variant_index: usize,
    out: &mut StrategyResult,
) -> Result<()> {
    let (fit_seed, sample_seed) = variant_seeds(config.seed, ctx.month, variant_index);
    out.fit_seed = Some(fit_seed);
    out.sample_seed = Some(sample_seed);

    let start = ctx.init - Duration::hours(variant.window.hours());
    let hours = hour_range(start, ctx.init);
    let price = data.spot.slice(start, ctx.init);
    let load = data.load.slice(start, ctx.init);
    price.at_hours(&hours)?;
    load.at_hours(&hours)?;
    let (price, load, caps) = cap_spikes(&price, &load)?;
    out.price_caps = Some(caps.price_hours.len());
    out.load_caps = Some(caps.load_hours.len());
    let load = normalize_load(&load, ctx.global_max)?;

    let train = TrainingSet::from_hourly(price.values(), load.values())?;
    let inducing = select_inducing(&train, variant.sparsity)?;
    out.inducing_points = Some(inducing.len());
    let model = initial_model(config, &train)?.with_inducing(inducing)?;
    let opts = FitOptions {
        restarts: config.restarts,
        seed: fit_seed,
        lbfgs: LbfgsOptions {
            max_iterations: config.max_iterations,
            ..LbfgsOptions::default()
        },
    };
    let fitted = fit(&model, &train, &opts)?;
    out.log_marginal_likelihood = fitted.fit_info.as_ref().map(|f| f.log_marginal_likelihood);

    let delivery = ctx.month.hours();
    let offsets: Vec<f64> = delivery
        .iter()
        .map(|t| (*t - start).num_hours() as f64)
        .collect();
    let draws =
        sample_posterior_scenarios(&fitted, &train, &offsets, config.n_samples, sample_seed)?;
    let scenarios = ScenarioSet::from_draws(
        delivery
            .iter()
            .zip(draws)
            .map(|(t, d)| (*t, d.price, d.load))
            .collect(),
    )?;
    let optimum = optimize_positions(
        &scenarios,
        &ctx.terms,
        Loss::Exponential {
            scale: config.payoff_scale,
        },
        &OptimizerOptions {
            grid: config.optimizer_grid,
            ..OptimizerOptions::default()
        },
    )?;
    out.optimizer_converged = Some(optimum.converged);
    out.position = Some(optimum.position);
    let payoff = realized_payoff(
        ctx.month,
        &data.spot,
        ctx.actual_load,
        optimum.position,
        &ctx.terms,
        ctx.global_max,
    )?;
    out.payoff_mio_gbp = Some(payoff.mio_gbp);
    Ok(())
}

fn describe(e: &Error) -> String {
    match e {
        Error::Gap { hours } => format!(
            "{} missing hours from {}",
            hours.len(),
            hours.first().map(|h| h.to_string()).unwrap_or_default()
        ),
        other => other.to_string(),
    }
}

/// Runs the comparator and every variant for one delivery month. Data
/// problems affecting the whole month mark it skipped; a failing variant is
/// recorded on its own row.
pub fn run_month(config: &BacktestConfig, data: &MarketData, month: YearMonth) -> MonthResult {
    let init_date = config.init_date(month);
    let mut result = MonthResult {
        month,
        init_date,
        forward: None,
        global_max: None,
        skipped: None,
        strategies: Vec::new(),
    };
    let init = init_date.and_hms_opt(0, 0, 0).expect("midnight");

    let Some(forward) = forward_asof(&data.forwards, month, init_date) else {
        result.skipped = Some(format!(
            "no forward quote for {month} on or before {init_date}"
        ));
        return result;
    };
    result.forward = Some(forward);
    let Some(global_max) = data.max_load_before(init) else {
        result.skipped = Some("no load history before initiation".into());
        return result;
    };
    result.global_max = Some(global_max);
    let actual = match normalize_load(&data.load.slice(month.start(), month.end()), global_max) {
        Ok(a) => a,
        Err(e) => {
            result.skipped = Some(describe(&e));
            return result;
        }
    };
    let hours = month.hours();
    if let Err(e) = data
        .spot
        .at_hours(&hours)
        .and_then(|_| actual.at_hours(&hours))
    {
        result.skipped = Some(format!("delivery month incomplete: {}", describe(&e)));
        return result;
    }
    let terms = match HedgeTerms::new(forward.base, forward.peak).and_then(|t| {
        let t = HedgeTerms {
            retailer_share: config.retailer_share,
            ..t
        };
        t.validate().map(|_| t)
    }) {
        Ok(t) => t,
        Err(e) => {
            result.skipped = Some(describe(&e));
            return result;
        }
    };

    let mut comp = StrategyResult::empty(COMPARATOR);
    let classes: Vec<HourClass> = hours.iter().map(|h| classify_hour(*h)).collect();
    let comparator = average_load_positions(actual.values(), &classes).and_then(|c| {
        let p = realized_payoff(month, &data.spot, &actual, c.position, &terms, global_max)?;
        Ok((c, p))
    });
    match comparator {
        Ok((c, p)) => {
            comp.position = Some(c.position);
            comp.clamped = Some(c.clamped);
            comp.payoff_mio_gbp = Some(p.mio_gbp);
        }
        Err(e) => {
            result.skipped = Some(format!("comparator: {}", describe(&e)));
            return result;
        }
    }
    result.strategies.push(comp);

    let ctx = MonthContext {
        month,
        init,
        terms,
        global_max,
        actual_load: &actual,
    };
    for (i, v) in config.variants().iter().enumerate() {
        let mut row = StrategyResult::empty(&v.label);
        if let Err(e) = run_variant(config, data, &ctx, v, i, &mut row) {
            row.failure = Some(describe(&e));
            row.position = None;
            row.payoff_mio_gbp = None;
        }
        result.strategies.push(row);
    }
    result
}

/// All months of a study plus what is needed to summarize them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub master_seed: u64,
    pub seed_scheme: String,
    pub strategies: Vec<String>,
    pub months: Vec<MonthResult>,
}

impl BacktestReport {
    pub fn variants(&self) -> &[String] {
        &self.strategies[1..]
    }

    /// Total payoff per strategy over the months where it has one.
    pub fn totals(&self) -> Vec<(String, f64)> {
        self.strategies
            .iter()
            .map(|s| {
                (
                    s.clone(),
                    self.months.iter().filter_map(|m| m.payoff(s)).sum(),
                )
            })
            .collect()
    }

    /// Running sum of `variant - comparator` per month; months lacking either
    /// carry the previous value.
    pub fn cumulative_excess(&self) -> Vec<(YearMonth, Vec<f64>)> {
        let mut acc = vec![0.0; self.variants().len()];
        self.months
            .iter()
            .map(|m| {
                for (a, v) in acc.iter_mut().zip(self.variants()) {
                    if let (Some(x), Some(c)) = (m.payoff(v), m.payoff(COMPARATOR)) {
                        *a += x - c;
                    }
                }
                (m.month, acc.clone())
            })
            .collect()
    }

    pub fn completed_months(&self) -> usize {
        self.months.iter().filter(|m| m.skipped.is_none()).count()
    }
}

/// Runs every configured month in order, calling `progress` after each.
pub fn run_study_with(
    config: &BacktestConfig,
    data: &MarketData,
    mut progress: impl FnMut(&MonthResult),
) -> Result<BacktestReport> {
    config.validate()?;
    let mut strategies = vec![COMPARATOR.to_string()];
    strategies.extend(config.variants().into_iter().map(|v| v.label));
    let months = config
        .months()
        .into_iter()
        .map(|m| {
            let r = run_month(config, data, m);
            progress(&r);
            r
        })
        .collect();
    Ok(BacktestReport {
        master_seed: config.seed,
        seed_scheme: SEED_SCHEME.to_string(),
        strategies,
        months,
    })
}

pub fn run_study(config: &BacktestConfig, data: &MarketData) -> Result<BacktestReport> {
    run_study_with(config, data, |_| {})
}
