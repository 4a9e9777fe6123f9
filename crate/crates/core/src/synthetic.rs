//! Seeded synthetic market: hourly spot and half-hourly demand sharing a slow
//! latent trend, daily and weekly profiles and correlated short-term noise,
//! with forward quotes struck at the trend-free baseline.

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec};
use crate::linalg::cholesky_with_jitter;
use crate::marketdata::{
    classify_hour, hour_range, ForwardQuote, HourClass, HourlySeries, RawDemandSeries, Unit,
    YearMonth,
};
use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// First hour of generated data.
    pub start: NaiveDate,
    /// Generated data ends at the start of this month.
    pub end: YearMonth,
    pub seed: u64,
    pub price_level: f64,
    /// Standard deviation of the shared trend's price contribution.
    pub price_trend: f64,
    pub price_noise: f64,
    pub load_level: f64,
    pub load_trend: f64,
    pub load_noise: f64,
    /// Lengthscale of the shared trend, hours.
    pub trend_lengthscale: f64,
    /// AR(1) coefficient of the hourly noise.
    pub noise_persistence: f64,
    /// Correlation of price and load noise.
    pub noise_correlation: f64,
    /// Standard deviation of forward quote errors, GBP/MWh.
    pub quote_noise: f64,
}

impl SynthConfig {
    /// Data from three months before `first` through the end of `last`.
    pub fn for_months(first: YearMonth, last: YearMonth, seed: u64) -> Self {
        let mut start = first;
        for _ in 0..3 {
            start = prev(start);
        }
        SynthConfig {
            start: start.first_day(),
            end: last.next(),
            seed,
            price_level: 50.0,
            price_trend: 12.0,
            price_noise: 4.0,
            load_level: 35_000.0,
            load_trend: 2_500.0,
            load_noise: 800.0,
            trend_lengthscale: 1_500.0,
            noise_persistence: 0.9,
            noise_correlation: 0.7,
            quote_noise: 0.5,
        }
    }
}

fn prev(m: YearMonth) -> YearMonth {
    if m.month == 1 {
        YearMonth {
            year: m.year - 1,
            month: 12,
        }
    } else {
        YearMonth {
            year: m.year,
            month: m.month - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMarket {
    pub spot: HourlySeries,
    pub demand: RawDemandSeries,
    pub forwards: Vec<ForwardQuote>,
}

/// One draw of a zero-mean periodic GP on a single period, tiled later.
fn periodic_profile(rng: &mut ChaCha8Rng, period: usize, amplitude: f64) -> Result<Vec<f64>> {
    let k = KernelSpec::periodic(amplitude, 0.7, period as f64)?;
    let xs: Vec<f64> = (0..period).map(|i| i as f64).collect();
    let l = cholesky_with_jitter(&gram_matrix(&k, &xs, &xs)?, "profile")?.l();
    let z = DVector::from_fn(period, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut p: Vec<f64> = (l * z).iter().copied().collect();
    let mean = p.iter().sum::<f64>() / period as f64;
    p.iter_mut().for_each(|v| *v -= mean);
    Ok(p)
}

/// Unit-variance SE-GP path via random Fourier features.
fn trend_path(rng: &mut ChaCha8Rng, n: usize, lengthscale: f64) -> Vec<f64> {
    const FEATURES: usize = 256;
    // exp(-r^2 / l^2) has spectral density N(0, 2 / l^2)
    let feats: Vec<(f64, f64, f64)> = (0..FEATURES)
        .map(|_| {
            let w = rng.sample::<f64, _>(StandardNormal) * 2f64.sqrt() / lengthscale;
            let b = rng.random_range(0.0..2.0 * PI);
            let a: f64 = rng.sample(StandardNormal);
            (w, b, a)
        })
        .collect();
    let norm = (2.0 / FEATURES as f64).sqrt();
    (0..n)
        .map(|t| {
            norm * feats
                .iter()
                .map(|(w, b, a)| a * (w * t as f64 + b).cos())
                .sum::<f64>()
        })
        .collect()
}

fn hour_of_week(t: NaiveDateTime) -> usize {
    t.weekday().num_days_from_monday() as usize * 24 + t.hour() as usize
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthMarket> {
    let start = cfg.start.and_hms_opt(0, 0, 0).expect("midnight");
    let hours = hour_range(start, cfg.end.start());
    if hours.len() < 24 * 7 {
        return Err(Error::Config("synthetic range shorter than a week".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = hours.len();
    let trend = trend_path(&mut rng, n, cfg.trend_lengthscale);
    let daily = periodic_profile(&mut rng, 24, 1.0)?;
    let weekly = periodic_profile(&mut rng, 168, 0.5)?;

    // shared shape: daytime and weekday load lifts price
    let shape: Vec<f64> = hours
        .iter()
        .map(|t| {
            let h = t.hour() as f64;
            let day = -(2.0 * PI * (h - 3.0) / 24.0).cos();
            let workday = if classify_hour(*t) == HourClass::Peak {
                0.6
            } else {
                0.0
            };
            day + workday + daily[t.hour() as usize] * 0.3 + weekly[hour_of_week(*t)] * 0.3
        })
        .collect();

    let (phi, rho) = (cfg.noise_persistence, cfg.noise_correlation);
    let innov = (1.0 - phi * phi).sqrt();
    let (mut ep, mut el) = (0.0f64, 0.0f64);
    let mut price = Vec::with_capacity(n);
    let mut load = Vec::with_capacity(n);
    for i in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        ep = phi * ep + innov * z1;
        el = phi * el + innov * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
        price.push(
            cfg.price_level + cfg.price_trend * trend[i] + 8.0 * shape[i] + cfg.price_noise * ep,
        );
        load.push(
            (cfg.load_level + cfg.load_trend * trend[i] + 4_000.0 * shape[i] + cfg.load_noise * el)
                .max(1_000.0),
        );
    }

    let mut demand_ts = Vec::with_capacity(2 * n);
    let mut demand = Vec::with_capacity(2 * n);
    for (t, l) in hours.iter().zip(&load) {
        let u: f64 = rng.sample::<f64, _>(StandardNormal) * 150.0;
        demand_ts.push(*t);
        demand.push(l + u);
        demand_ts.push(*t + Duration::minutes(30));
        demand.push(l - u);
    }

    // forwards: baseline level plus the month's mean profile, no trend
    let mut forwards = Vec::new();
    let mut m = YearMonth::of(cfg.start);
    while m < cfg.end {
        let (mut all, mut peak) = (Vec::new(), Vec::new());
        for (t, s) in hours.iter().zip(&shape) {
            if YearMonth::of(t.date()) == m {
                all.push(*s);
                if classify_hour(*t) == HourClass::Peak {
                    peak.push(*s);
                }
            }
        }
        if !all.is_empty() && !peak.is_empty() {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let base = cfg.price_level
                + 8.0 * mean(&all)
                + cfg.quote_noise * rng.sample::<f64, _>(StandardNormal);
            let peak_px = (cfg.price_level
                + 8.0 * mean(&peak)
                + cfg.quote_noise * rng.sample::<f64, _>(StandardNormal))
            .max(base);
            // the same close on every weekday of the 40 days before delivery
            for back in 1..=40 {
                let d = m.first_day() - Duration::days(back);
                if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                    continue;
                }
                forwards.push(ForwardQuote::new(m, d, base.max(1.0), peak_px.max(1.0))?);
            }
        }
        m = m.next();
    }
    forwards.sort_by_key(|q| (q.delivery_month, q.quote_date));

    Ok(SynthMarket {
        spot: HourlySeries::new(hours, price, Unit::GbpPerMwh)?,
        demand: RawDemandSeries::new(demand_ts, demand)?,
        forwards,
    })
}
