use super::{HourlySeries, RawDemandSeries, Unit};
use crate::error::{Error, Result};
use chrono::{Duration, NaiveDateTime, Timelike};
use std::collections::BTreeMap;

/// Hourly load plus the hours that could not be formed.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadConversion {
    pub load: HourlySeries,
    pub gaps: Vec<NaiveDateTime>,
}

impl LoadConversion {
    /// The load series, or a gap error when any hour was dropped.
    pub fn strict(self) -> Result<HourlySeries> {
        if self.gaps.is_empty() {
            Ok(self.load)
        } else {
            Err(Error::Gap { hours: self.gaps })
        }
    }
}

fn hour_start(t: NaiveDateTime) -> NaiveDateTime {
    t.with_minute(0)
        .and_then(|t| t.with_second(0))
        .expect("valid time")
}

/// Hourly load (MWh) as the mean of the :00 and :30 demand readings (MW).
/// Hours between the first and last reading lacking either snapshot are
/// reported as gaps and left out.
pub fn demand_to_load(raw: &RawDemandSeries) -> Result<LoadConversion> {
    let mut hours: BTreeMap<NaiveDateTime, [Option<f64>; 2]> = BTreeMap::new();
    for (t, v) in raw.timestamps.iter().zip(&raw.values) {
        let slot = match (t.minute(), t.second(), t.nanosecond()) {
            (0, 0, 0) => 0,
            (30, 0, 0) => 1,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "demand reading at {t} is not on a half hour"
                )))
            }
        };
        hours.entry(hour_start(*t)).or_default()[slot] = Some(*v);
    }
    let (mut ts, mut vs, mut gaps) = (Vec::new(), Vec::new(), Vec::new());
    let (Some(first), Some(last)) = (hours.keys().next().copied(), hours.keys().last().copied())
    else {
        return Ok(LoadConversion {
            load: HourlySeries::new(vec![], vec![], Unit::Mwh)?,
            gaps,
        });
    };
    let mut h = first;
    while h <= last {
        match hours.get(&h) {
            Some([Some(a), Some(b)]) => {
                ts.push(h);
                vs.push(0.5 * (a + b));
            }
            _ => gaps.push(h),
        }
        h += Duration::hours(1);
    }
    Ok(LoadConversion {
        load: HourlySeries::new(ts, vs, Unit::Mwh)?,
        gaps,
    })
}

/// Mean and population standard deviation of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub sd: f64,
}

impl WindowStats {
    pub fn of(values: &[f64], what: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateStats(format!("{what}: empty window")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateStats(format!("{what}: zero variance")));
        }
        Ok(WindowStats { mean, sd })
    }

    pub fn lower(&self) -> f64 {
        self.mean - 3.0 * self.sd
    }

    pub fn upper(&self) -> f64 {
        self.mean + 3.0 * self.sd
    }

    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lower(), self.upper())
    }
}

/// Frozen mean +/- 3 SD bands for price and load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapBands {
    pub price: WindowStats,
    pub load: WindowStats,
}

impl CapBands {
    pub fn from_window(price: &HourlySeries, load: &HourlySeries) -> Result<Self> {
        Ok(CapBands {
            price: WindowStats::of(price.values(), "price")?,
            load: WindowStats::of(load.values(), "load")?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CapLog {
    pub price_hours: Vec<NaiveDateTime>,
    pub load_hours: Vec<NaiveDateTime>,
}

/// Clips price to its band; wherever price was clipped, load is clipped to
/// its own band too.
pub fn cap_with_bands(
    bands: &CapBands,
    price: &HourlySeries,
    load: &HourlySeries,
) -> Result<(HourlySeries, HourlySeries, CapLog)> {
    if price.timestamps() != load.timestamps() {
        return Err(Error::InvalidInput(
            "price and load are not on the same hourly grid".into(),
        ));
    }
    let mut p = price.values().to_vec();
    let mut l = load.values().to_vec();
    let mut log = CapLog::default();
    for (i, t) in price.timestamps().iter().enumerate() {
        let capped = bands.price.clip(p[i]);
        if capped != p[i] {
            p[i] = capped;
            log.price_hours.push(*t);
            let lc = bands.load.clip(l[i]);
            if lc != l[i] {
                l[i] = lc;
                log.load_hours.push(*t);
            }
        }
    }
    Ok((
        price.with_values(p, price.unit())?,
        load.with_values(l, load.unit())?,
        log,
    ))
}

/// [`cap_with_bands`] with bands computed from the given window.
pub fn cap_spikes(
    price: &HourlySeries,
    load: &HourlySeries,
) -> Result<(HourlySeries, HourlySeries, CapLog)> {
    cap_with_bands(&CapBands::from_window(price, load)?, price, load)
}

pub fn normalize_load(load: &HourlySeries, global_max: f64) -> Result<HourlySeries> {
    if !(global_max.is_finite() && global_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "normalization maximum must be positive, got {global_max}"
        )));
    }
    load.with_values(
        load.values().iter().map(|v| v / global_max).collect(),
        Unit::Normalized,
    )
}
