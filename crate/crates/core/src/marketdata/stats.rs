use super::preprocess::WindowStats;
use super::{classify_hour, HourClass, HourlySeries};
use crate::error::Result;
use serde::Serialize;

pub const BUCKET_LABELS: [&str; 6] = ["SD<1", "1<SD<2", "2<SD<3", "3<SD<4", "4<SD<5", "SD>5"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassHistogram {
    pub class: HourClass,
    pub mean: f64,
    pub sd: f64,
    pub counts: [usize; 6],
    pub percentages: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketHistogram {
    pub peak: ClassHistogram,
    pub off_peak: ClassHistogram,
}

impl BucketHistogram {
    /// Plain-text table, one row per class.
    pub fn render(&self) -> String {
        let mut out = format!("{:<9}{:>8}", "class", "n");
        for l in BUCKET_LABELS {
            out.push_str(&format!("{l:>14}"));
        }
        out.push('\n');
        for h in [&self.peak, &self.off_peak] {
            let n: usize = h.counts.iter().sum();
            out.push_str(&format!("{:<9}{:>8}", h.class.name(), n));
            for (c, p) in h.counts.iter().zip(&h.percentages) {
                out.push_str(&format!("{:>14}", format!("{c} ({p:.2}%)")));
            }
            out.push('\n');
        }
        out
    }
}

fn class_histogram(class: HourClass, values: &[f64]) -> Result<ClassHistogram> {
    let stats = WindowStats::of(values, class.name())?;
    let mut counts = [0usize; 6];
    for v in values {
        let z = (v - stats.mean).abs() / stats.sd;
        counts[(z.floor() as usize).min(5)] += 1;
    }
    let n = values.len() as f64;
    let percentages = counts.map(|c| 100.0 * c as f64 / n);
    Ok(ClassHistogram {
        class,
        mean: stats.mean,
        sd: stats.sd,
        counts,
        percentages,
    })
}

/// Counts of `|v - mean| / sd` per unit bucket, separately for peak and
/// off-peak hours, each with its own mean and population SD.
pub fn sd_bucket_histogram(series: &HourlySeries) -> Result<BucketHistogram> {
    let (mut peak, mut off) = (Vec::new(), Vec::new());
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        match classify_hour(*t) {
            HourClass::Peak => peak.push(*v),
            HourClass::OffPeak => off.push(*v),
        }
    }
    Ok(BucketHistogram {
        peak: class_histogram(HourClass::Peak, &peak)?,
        off_peak: class_histogram(HourClass::OffPeak, &off)?,
    })
}
