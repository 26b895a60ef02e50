//! Calendar-month index used by every monthly panel.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// A calendar month, stored as a count of months since January of year 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(i32);

impl Month {
    /// Returns `None` when `month` is not in 1..=12.
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12)
            .contains(&month)
            .then(|| Month(year * 12 + month as i32 - 1))
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    pub fn next(self) -> Self {
        Month(self.0 + 1)
    }

    pub fn offset(self, months: i32) -> Self {
        Month(self.0 + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: Month) -> i32 {
        other.0 - self.0
    }

    pub fn of_date(date: NaiveDate) -> Self {
        Month(date.year() * 12 + date.month0() as i32)
    }

    /// First day of the month.
    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year(), self.month(), 1).expect("valid month")
    }

    /// Consecutive months from `start` to `end` inclusive.
    pub fn range_inclusive(start: Month, end: Month) -> Vec<Month> {
        (start.0..=end.0).map(Month).collect()
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

/// Accepts `yyyy-mm`, `yyyy-mm-dd`, `yyyy:mm` and FRED's `m/d/yyyy`.
impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::format(0, format!("unparseable date `{s}`"));
        if let Some((m, rest)) = s.split_once('/') {
            let (_, y) = rest.split_once('/').ok_or_else(bad)?;
            let month: u32 = m.parse().map_err(|_| bad())?;
            let year: i32 = y.parse().map_err(|_| bad())?;
            return Month::new(year, month).ok_or_else(bad);
        }
        let mut parts = s.split(['-', ':']);
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let day: u32 = day.parse().map_err(|_| bad())?;
            NaiveDate::from_ymd_opt(year, month, day).ok_or_else(bad)?;
        }
        Month::new(year, month).ok_or_else(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_supported_layouts() {
        let want = Month::new(2020, 3).unwrap();
        for s in ["2020-03", "2020-03-01", "3/1/2020", "2020:03", " 2020-3 "] {
            assert_eq!(s.parse::<Month>().unwrap(), want, "{s}");
        }
        assert!("2020-13".parse::<Month>().is_err());
        assert!("2020-02-30".parse::<Month>().is_err());
        assert!("garbage".parse::<Month>().is_err());
    }

    #[test]
    fn arithmetic_crosses_year_boundaries() {
        let dec = Month::new(2019, 12).unwrap();
        assert_eq!(dec.next(), Month::new(2020, 1).unwrap());
        assert_eq!(dec.offset(-11), Month::new(2019, 1).unwrap());
        assert_eq!(dec.months_until(Month::new(2020, 12).unwrap()), 12);
        assert_eq!(dec.to_string(), "2019-12");
        assert_eq!(Month::new(1960, 3).unwrap().months_until(Month::new(2020, 2).unwrap()), 719);
    }
}
