use crate::marketdata::YearMonth;
use chrono::{Datelike, Duration, NaiveDate, Weekday};

/// Historical initiation dates, (delivery year, month, init y, m, d).
const TABLE: &[(i32, u32, i32, u32, u32)] = &[
    (2016, 1, 2015, 12, 18),
    (2016, 2, 2016, 1, 18),
    (2016, 3, 2016, 2, 16),
    (2016, 4, 2016, 3, 21),
    (2016, 5, 2016, 4, 18),
    (2016, 6, 2016, 5, 19),
    (2016, 7, 2016, 6, 20),
    (2016, 8, 2016, 7, 18),
    (2016, 9, 2016, 8, 18),
    (2016, 10, 2016, 9, 19),
    (2016, 11, 2016, 10, 18),
    (2016, 12, 2016, 11, 17),
    (2017, 1, 2016, 12, 19),
    (2017, 2, 2017, 1, 18),
    (2017, 3, 2017, 2, 15),
    (2017, 4, 2017, 3, 20),
    (2017, 5, 2017, 4, 18),
    (2017, 6, 2017, 5, 18),
    (2017, 7, 2017, 6, 16),
    (2017, 8, 2017, 7, 18),
    (2017, 9, 2017, 8, 18),
    (2017, 10, 2017, 9, 15),
    (2017, 11, 2017, 10, 18),
    (2017, 12, 2017, 11, 17),
    (2018, 1, 2017, 12, 18),
    (2018, 3, 2018, 2, 15),
    (2018, 4, 2018, 3, 16),
    (2018, 5, 2018, 4, 17),
    (2018, 6, 2018, 5, 18),
    (2018, 7, 2018, 6, 18),
    (2018, 8, 2018, 7, 18),
    (2018, 9, 2018, 8, 17),
    (2018, 10, 2018, 9, 17),
    (2018, 11, 2018, 10, 18),
    (2018, 12, 2018, 11, 16),
];

/// Weekday nearest to 14 days before the first of `month`.
pub fn rule_init_date(month: YearMonth) -> NaiveDate {
    let d = month.first_day() - Duration::days(14);
    match d.weekday() {
        Weekday::Sat => d - Duration::days(1),
        Weekday::Sun => d + Duration::days(1),
        _ => d,
    }
}

/// Tabulated date when known, otherwise [`rule_init_date`].
pub fn default_init_date(month: YearMonth) -> NaiveDate {
    TABLE
        .iter()
        .find(|(y, m, ..)| *y == month.year && *m == month.month)
        .and_then(|&(_, _, y, m, d)| NaiveDate::from_ymd_opt(y, m, d))
        .unwrap_or_else(|| rule_init_date(month))
}
