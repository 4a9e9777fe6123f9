//! Market series: half-hourly demand, hourly spot prices and monthly forward
//! quotes, plus the peak/off-peak calendar and window preprocessing.

mod io;
mod preprocess;
mod stats;

pub use io::{
    parse_timestamp, read_demand_csv, read_demand_from, read_forwards_csv, read_forwards_from,
    read_spot_csv, read_spot_from, write_demand_csv, write_forwards_csv, write_spot_csv,
};
pub use preprocess::{
    cap_spikes, cap_with_bands, demand_to_load, normalize_load, CapBands, CapLog, LoadConversion,
    WindowStats,
};
pub use stats::{sd_bucket_histogram, BucketHistogram, ClassHistogram, BUCKET_LABELS};

use crate::error::{Error, Result};
use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    GbpPerMwh,
    Mwh,
    Normalized,
}

/// Demand snapshots in MW, nominally every 30 minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDemandSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
}

impl RawDemandSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        check_series(&timestamps, &values)?;
        Ok(RawDemandSeries { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_series(timestamps: &[NaiveDateTime], values: &[f64]) -> Result<()> {
    if timestamps.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} timestamps but {} values",
            timestamps.len(),
            values.len()
        )));
    }
    if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "timestamps not strictly increasing at {}",
            w[1]
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value at {}",
            timestamps[i]
        )));
    }
    Ok(())
}

/// Values on hour-start timestamps. Hours may be missing (reported gaps) but
/// never duplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    timestamps: Vec<NaiveDateTime>,
    values: Vec<f64>,
    unit: Unit,
}

impl HourlySeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>, unit: Unit) -> Result<Self> {
        check_series(&timestamps, &values)?;
        if let Some(t) = timestamps
            .iter()
            .find(|t| t.minute() != 0 || t.second() != 0 || t.nanosecond() != 0)
        {
            return Err(Error::InvalidInput(format!(
                "{t} is not on the hourly grid"
            )));
        }
        Ok(HourlySeries {
            timestamps,
            values,
            unit,
        })
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, ts: NaiveDateTime) -> Option<f64> {
        self.timestamps
            .binary_search(&ts)
            .ok()
            .map(|i| self.values[i])
    }

    /// Entries with `from <= t < to`.
    pub fn slice(&self, from: NaiveDateTime, to: NaiveDateTime) -> HourlySeries {
        let a = self.timestamps.partition_point(|t| *t < from);
        let b = self.timestamps.partition_point(|t| *t < to);
        HourlySeries {
            timestamps: self.timestamps[a..b].to_vec(),
            values: self.values[a..b].to_vec(),
            unit: self.unit,
        }
    }

    /// Values at every hour of `hours`, or a gap error listing the missing ones.
    pub fn at_hours(&self, hours: &[NaiveDateTime]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(hours.len());
        let mut missing = Vec::new();
        for &h in hours {
            match self.get(h) {
                Some(v) => out.push(v),
                None => missing.push(h),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::Gap { hours: missing })
        }
    }

    pub fn with_values(&self, values: Vec<f64>, unit: Unit) -> Result<HourlySeries> {
        HourlySeries::new(self.timestamps.clone(), values, unit)
    }
}

/// Hours `start, start + 1h, ..` strictly before `end`.
pub fn hour_range(start: NaiveDateTime, end: NaiveDateTime) -> Vec<NaiveDateTime> {
    let mut out = Vec::new();
    let mut t = start;
    while t < end {
        out.push(t);
        t += Duration::hours(1);
    }
    out
}

/// Calendar month, `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn start(self) -> NaiveDateTime {
        self.first_day().and_hms_opt(0, 0, 0).expect("midnight")
    }

    pub fn end(self) -> NaiveDateTime {
        self.next().start()
    }

    pub fn hours(self) -> Vec<NaiveDateTime> {
        hour_range(self.start(), self.end())
    }

    /// Inclusive range of months.
    pub fn range(first: YearMonth, last: YearMonth) -> Vec<YearMonth> {
        let mut out = Vec::new();
        let mut m = first;
        while m <= last {
            out.push(m);
            m = m.next();
        }
        out
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected YYYY-MM, got '{s}'"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

/// Forward closes for one delivery month as of one quote date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardQuote {
    pub delivery_month: YearMonth,
    pub quote_date: NaiveDate,
    pub base: f64,
    pub peak: f64,
}

impl ForwardQuote {
    pub fn new(
        delivery_month: YearMonth,
        quote_date: NaiveDate,
        base: f64,
        peak: f64,
    ) -> Result<Self> {
        if !(base.is_finite() && base > 0.0 && peak.is_finite() && peak >= base) {
            return Err(Error::InvalidInput(format!(
                "forward quote for {delivery_month} needs 0 < base <= peak (base {base}, peak {peak})"
            )));
        }
        Ok(ForwardQuote {
            delivery_month,
            quote_date,
            base,
            peak,
        })
    }
}

/// Latest quote for `month` dated on or before `asof`.
pub fn forward_asof(
    quotes: &[ForwardQuote],
    month: YearMonth,
    asof: NaiveDate,
) -> Option<ForwardQuote> {
    quotes
        .iter()
        .filter(|q| q.delivery_month == month && q.quote_date <= asof)
        .max_by_key(|q| q.quote_date)
        .copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HourClass {
    Peak,
    OffPeak,
}

impl HourClass {
    pub fn name(self) -> &'static str {
        match self {
            HourClass::Peak => "peak",
            HourClass::OffPeak => "off-peak",
        }
    }
}

/// Peak hours start 07:00..=18:00 on Monday to Friday.
pub fn classify_hour(ts: NaiveDateTime) -> HourClass {
    let weekday = !matches!(ts.weekday(), Weekday::Sat | Weekday::Sun);
    if weekday && (7..=18).contains(&ts.hour()) {
        HourClass::Peak
    } else {
        HourClass::OffPeak
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(h, 0, 0)
            .unwrap()
    }

    #[test]
    fn classification_examples() {
        // 2018-01-03 is a Wednesday
        assert_eq!(classify_hour(at(2018, 1, 3, 8)), HourClass::Peak);
        assert_eq!(classify_hour(at(2018, 1, 6, 12)), HourClass::OffPeak);
        assert_eq!(classify_hour(at(2018, 1, 3, 19)), HourClass::OffPeak);
        assert_eq!(classify_hour(at(2018, 1, 3, 7)), HourClass::Peak);
        assert_eq!(classify_hour(at(2018, 1, 3, 18)), HourClass::Peak);
        assert_eq!(classify_hour(at(2018, 1, 3, 6)), HourClass::OffPeak);
    }

    proptest! {
        #[test]
        fn month_partition(year in 2000i32..2040, month in 1u32..=12) {
            let ym = YearMonth::new(year, month).unwrap();
            let hours = ym.hours();
            let peak = hours.iter().filter(|h| classify_hour(**h) == HourClass::Peak).count();
            let days = hours.len() / 24;
            let weekdays = (0..days)
                .filter(|d| {
                    let w = (ym.first_day() + Duration::days(*d as i64)).weekday();
                    !matches!(w, Weekday::Sat | Weekday::Sun)
                })
                .count();
            prop_assert_eq!(hours.len() % 24, 0);
            prop_assert_eq!(peak, 12 * weekdays);
        }
    }

    #[test]
    fn year_month_parsing() {
        let m: YearMonth = "2018-02".parse().unwrap();
        assert_eq!(m.to_string(), "2018-02");
        assert_eq!(m.hours().len(), 28 * 24);
        assert_eq!(
            YearMonth::new(2018, 12).unwrap().next().to_string(),
            "2019-01"
        );
        assert!("2018-2".parse::<YearMonth>().is_err());
        assert!("2018-13".parse::<YearMonth>().is_err());
    }

    #[test]
    fn hourly_series_lookup() {
        let ts = vec![at(2018, 1, 1, 0), at(2018, 1, 1, 1), at(2018, 1, 1, 3)];
        let s = HourlySeries::new(ts, vec![1.0, 2.0, 4.0], Unit::Mwh).unwrap();
        assert_eq!(s.get(at(2018, 1, 1, 1)), Some(2.0));
        assert_eq!(
            s.slice(at(2018, 1, 1, 1), at(2018, 1, 1, 3)).values(),
            &[2.0]
        );
        let hours = hour_range(at(2018, 1, 1, 0), at(2018, 1, 1, 4));
        match s.at_hours(&hours) {
            Err(Error::Gap { hours }) => assert_eq!(hours, vec![at(2018, 1, 1, 2)]),
            other => panic!("{other:?}"),
        }
        let off_grid = at(2018, 1, 1, 0) + Duration::minutes(30);
        assert!(HourlySeries::new(vec![off_grid], vec![1.0], Unit::Mwh).is_err());
    }

    #[test]
    fn forward_selection() {
        let m = YearMonth::new(2018, 3).unwrap();
        let d = |day| NaiveDate::from_ymd_opt(2018, 2, day).unwrap();
        let quotes = vec![
            ForwardQuote::new(m, d(10), 40.0, 50.0).unwrap(),
            ForwardQuote::new(m, d(14), 41.0, 51.0).unwrap(),
            ForwardQuote::new(m, d(20), 42.0, 52.0).unwrap(),
        ];
        assert_eq!(forward_asof(&quotes, m, d(15)).unwrap().base, 41.0);
        assert!(forward_asof(&quotes, m, d(1)).is_none());
        assert!(ForwardQuote::new(m, d(1), 50.0, 40.0).is_err());
    }
}
