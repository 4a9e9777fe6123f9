use super::{ForwardQuote, HourlySeries, RawDemandSeries, Unit, YearMonth};
use crate::error::{Error, Result};
use chrono::{NaiveDate, NaiveDateTime};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const DEMAND_HEADER: [&str; 2] = ["timestamp", "demand_mw"];
const SPOT_HEADER: [&str; 2] = ["timestamp", "price_gbp_mwh"];
const FORWARDS_HEADER: [&str; 4] = ["delivery_month", "quote_date", "base_close", "peak_close"];

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

/// ISO-8601 local timestamp, `T` or space separated, seconds optional.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

struct Rows<R: Read> {
    path: PathBuf,
    reader: csv::Reader<R>,
}

impl<R: Read> Rows<R> {
    fn open(path: PathBuf, src: R, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(src);
        let found = reader.headers().map_err(|e| Error::Parse {
            path: path.clone(),
            line: 1,
            message: e.to_string(),
        })?;
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                path,
                line: 1,
                message: format!(
                    "expected header '{}', found '{}'",
                    header.join(","),
                    found.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        Ok(Rows { path, reader })
    }

    fn error(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn for_each(
        mut self,
        mut f: impl FnMut(&Self, u64, &csv::StringRecord) -> Result<()>,
    ) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    f(&self, line, &record)?;
                }
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Err(self.error(line, e.to_string()));
                }
            }
        }
    }
}

fn number(rows: &Rows<impl Read>, line: u64, field: &str, name: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(rows.error(line, format!("bad {name} '{field}'"))),
    }
}

fn timestamp(rows: &Rows<impl Read>, line: u64, field: &str) -> Result<NaiveDateTime> {
    parse_timestamp(field).ok_or_else(|| rows.error(line, format!("bad timestamp '{field}'")))
}

fn increasing(
    rows: &Rows<impl Read>,
    line: u64,
    last: Option<&NaiveDateTime>,
    t: NaiveDateTime,
) -> Result<()> {
    match last {
        Some(prev) if t <= *prev => {
            Err(rows.error(line, format!("timestamp {t} not after {prev}")))
        }
        _ => Ok(()),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_demand_from(src: impl Read, path: &Path) -> Result<RawDemandSeries> {
    let rows = Rows::open(path.to_path_buf(), src, &DEMAND_HEADER)?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    rows.for_each(|rows, line, rec| {
        let t = timestamp(rows, line, &rec[0])?;
        increasing(rows, line, ts.last(), t)?;
        ts.push(t);
        vs.push(number(rows, line, &rec[1], "demand")?);
        Ok(())
    })?;
    RawDemandSeries::new(ts, vs)
}

pub fn read_demand_csv(path: &Path) -> Result<RawDemandSeries> {
    read_demand_from(open(path)?, path)
}

pub fn read_spot_from(src: impl Read, path: &Path) -> Result<HourlySeries> {
    let rows = Rows::open(path.to_path_buf(), src, &SPOT_HEADER)?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    rows.for_each(|rows, line, rec| {
        let t = timestamp(rows, line, &rec[0])?;
        increasing(rows, line, ts.last(), t)?;
        if t.and_utc().timestamp() % 3600 != 0 {
            return Err(rows.error(line, format!("{t} is not on the hourly grid")));
        }
        ts.push(t);
        vs.push(number(rows, line, &rec[1], "price")?);
        Ok(())
    })?;
    HourlySeries::new(ts, vs, Unit::GbpPerMwh)
}

pub fn read_spot_csv(path: &Path) -> Result<HourlySeries> {
    read_spot_from(open(path)?, path)
}

pub fn read_forwards_from(src: impl Read, path: &Path) -> Result<Vec<ForwardQuote>> {
    let rows = Rows::open(path.to_path_buf(), src, &FORWARDS_HEADER)?;
    let mut out = Vec::new();
    rows.for_each(|rows, line, rec| {
        let month: YearMonth = rec[0]
            .parse()
            .map_err(|_| rows.error(line, format!("bad delivery month '{}'", &rec[0])))?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|_| rows.error(line, format!("bad quote date '{}'", &rec[1])))?;
        let base = number(rows, line, &rec[2], "base close")?;
        let peak = number(rows, line, &rec[3], "peak close")?;
        let q = ForwardQuote::new(month, date, base, peak)
            .map_err(|e| rows.error(line, e.to_string()))?;
        out.push(q);
        Ok(())
    })?;
    Ok(out)
}

pub fn read_forwards_csv(path: &Path) -> Result<Vec<ForwardQuote>> {
    read_forwards_from(open(path)?, path)
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

fn fmt_ts(t: &NaiveDateTime) -> String {
    t.format("%Y-%m-%dT%H:%M:%S").to_string()
}

pub fn write_demand_csv(path: &Path, series: &RawDemandSeries) -> Result<()> {
    write_rows(
        path,
        &DEMAND_HEADER,
        series
            .timestamps
            .iter()
            .zip(&series.values)
            .map(|(t, v)| vec![fmt_ts(t), format!("{v:.3}")]),
    )
}

pub fn write_spot_csv(path: &Path, series: &HourlySeries) -> Result<()> {
    write_rows(
        path,
        &SPOT_HEADER,
        series
            .timestamps()
            .iter()
            .zip(series.values())
            .map(|(t, v)| vec![fmt_ts(t), format!("{v:.4}")]),
    )
}

pub fn write_forwards_csv(path: &Path, quotes: &[ForwardQuote]) -> Result<()> {
    write_rows(
        path,
        &FORWARDS_HEADER,
        quotes.iter().map(|q| {
            vec![
                q.delivery_month.to_string(),
                q.quote_date.format("%Y-%m-%d").to_string(),
                format!("{:.4}", q.base),
                format!("{:.4}", q.peak),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn timestamp_forms() {
        let a = parse_timestamp("2018-01-01T05:30:00").unwrap();
        assert_eq!(parse_timestamp("2018-01-01 05:30"), Some(a));
        assert_eq!(parse_timestamp(" 2018-01-01T05:30 "), Some(a));
        assert!(parse_timestamp("01/01/2018 05:30").is_none());
    }

    #[test]
    fn demand_roundtrip() {
        let csv = "timestamp,demand_mw\n2018-01-01T00:00:00,30000\n2018-01-01T00:30:00,32000\n";
        let d = read_demand_from(csv.as_bytes(), p()).unwrap();
        assert_eq!(d.values, vec![30000.0, 32000.0]);
    }

    #[test]
    fn unknown_header_rejected() {
        let csv = "timestamp,demand\n2018-01-01T00:00:00,1\n";
        match read_demand_from(csv.as_bytes(), p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let csv = "timestamp,price_gbp_mwh,extra\n";
        assert!(read_spot_from(csv.as_bytes(), p()).is_err());
    }

    #[test]
    fn first_bad_line_reported() {
        let csv = "timestamp,price_gbp_mwh\n2018-01-01T00:00,40\n2018-01-01T01:00,4x\n2018-01-01T02:00,nan\n";
        match read_spot_from(csv.as_bytes(), p()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("4x"));
            }
            other => panic!("{other:?}"),
        }
        let csv = "timestamp,price_gbp_mwh\n2018-01-01T00:30,40\n";
        assert!(matches!(
            read_spot_from(csv.as_bytes(), p()),
            Err(Error::Parse { line: 2, .. })
        ));
        let csv = "timestamp,price_gbp_mwh\n2018-01-01T01:00,40\n2018-01-01T00:00,41\n";
        assert!(matches!(
            read_spot_from(csv.as_bytes(), p()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn forwards_parse_and_validate() {
        let csv = "delivery_month,quote_date,base_close,peak_close\n2018-03,2018-02-14,45.5,52.1\n";
        let q = read_forwards_from(csv.as_bytes(), p()).unwrap();
        assert_eq!(q[0].delivery_month.to_string(), "2018-03");
        assert_eq!(q[0].peak, 52.1);
        let bad = "delivery_month,quote_date,base_close,peak_close\n2018-03,2018-02-14,55,52\n";
        assert!(matches!(
            read_forwards_from(bad.as_bytes(), p()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let m = YearMonth::new(2018, 3).unwrap();
        let q =
            vec![
                ForwardQuote::new(m, NaiveDate::from_ymd_opt(2018, 2, 14).unwrap(), 40.0, 48.5)
                    .unwrap(),
            ];
        write_forwards_csv(&path, &q).unwrap();
        assert_eq!(read_forwards_csv(&path).unwrap(), q);
        assert!(matches!(
            read_spot_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }
}
