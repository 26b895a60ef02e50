//! Monthly COVID indicators: summed levels `V` and log growth `v` for
//! hospitalizations (H), positive cases (P) and deaths (D).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::DailyCovidSeries;
use crate::month::Month;

/// Which daily count an indicator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovidKind {
    Hospitalized,
    Positive,
    Death,
}

impl CovidKind {
    pub const ALL: [CovidKind; 3] = [CovidKind::Hospitalized, CovidKind::Positive, CovidKind::Death];

    pub fn letter(self) -> char {
        match self {
            CovidKind::Hospitalized => 'H',
            CovidKind::Positive => 'P',
            CovidKind::Death => 'D',
        }
    }
}

impl fmt::Display for CovidKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for CovidKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H" | "HOSPITALIZED" => Ok(CovidKind::Hospitalized),
            "P" | "POSITIVE" => Ok(CovidKind::Positive),
            "D" | "DEATH" | "DEATHS" => Ok(CovidKind::Death),
            other => Err(Error::invalid(format!("unknown covid indicator `{other}` (expected H, P or D)"))),
        }
    }
}

/// Monthly level and growth series for one kind of count.
#[derive(Debug, Clone)]
pub struct CovidIndicator {
    pub kind: CovidKind,
    pub months: Vec<Month>,
    /// Summed daily increments per month.
    pub level: Vec<f64>,
    /// `log(V_t / V_{t-1})`; `NaN` where undefined.
    pub growth: Vec<f64>,
}

/// Sums daily increments into calendar months. Months inside the covered
/// span without any rows are 0.
pub fn aggregate_monthly(daily: &DailyCovidSeries, kind: CovidKind) -> Result<(Vec<Month>, Vec<f64>)> {
    if daily.is_empty() {
        return Err(Error::Empty("daily covid series".into()));
    }
    let first = Month::of_date(daily.dates[0]);
    let last = Month::of_date(*daily.dates.last().expect("non-empty"));
    let months = Month::range_inclusive(first, last);
    let mut level = vec![0.0; months.len()];
    for (d, &c) in daily.dates.iter().zip(daily.counts(kind)) {
        level[first.months_until(Month::of_date(*d)) as usize] += c;
    }
    Ok((months, level))
}

/// Monthly log growth of a level series.
///
/// Both neighbours zero gives 0 (pre-outbreak), a zero or negative
/// denominator otherwise leaves the entry undefined. The series is assumed to
/// be zero before its first month. For hospitalizations a zero in the month
/// right before the first positive month is read as 1, so the outbreak month
/// has a finite growth rate.
pub fn growth_rate(level: &[f64], kind: CovidKind) -> Vec<f64> {
    let first_positive = level.iter().position(|&v| v > 0.0);
    let mut prev_levels: Vec<f64> = std::iter::once(0.0).chain(level.iter().copied()).take(level.len()).collect();
    if kind == CovidKind::Hospitalized {
        if let Some(f) = first_positive.filter(|&f| f > 0) {
            if prev_levels[f] == 0.0 {
                prev_levels[f] = 1.0;
            }
        }
    }
    level
        .iter()
        .zip(&prev_levels)
        .enumerate()
        .map(|(t, (&cur, &prev))| {
            let original_prev = if t == 0 { 0.0 } else { level[t - 1] };
            if cur == 0.0 && original_prev == 0.0 {
                0.0
            } else if cur > 0.0 && prev > 0.0 {
                (cur / prev).ln()
            } else {
                f64::NAN
            }
        })
        .collect()
}

impl CovidIndicator {
    pub fn from_daily(daily: &DailyCovidSeries, kind: CovidKind) -> Result<Self> {
        let (months, level) = aggregate_monthly(daily, kind)?;
        let growth = growth_rate(&level, kind);
        Ok(CovidIndicator {
            kind,
            months,
            level,
            growth,
        })
    }

    pub fn level_at(&self, m: Month) -> Option<f64> {
        let i = self.months.first()?.months_until(m);
        (i >= 0).then(|| self.level.get(i as usize).copied()).flatten()
    }

    pub fn growth_at(&self, m: Month) -> Option<f64> {
        let i = self.months.first()?.months_until(m);
        (i >= 0).then(|| self.growth.get(i as usize).copied()).flatten()
    }

    /// Growth series on a panel's date index: 0 through `last_pre_covid`
    /// (the virus factor is zero before the outbreak), the indicator's growth
    /// afterwards. Months after the outbreak but before the indicator starts
    /// carry no cases and are 0.
    pub fn aligned_growth(&self, dates: &[Month], last_pre_covid: Month) -> Result<Vec<f64>> {
        let first = *self.months.first().ok_or_else(|| Error::Empty("covid indicator".into()))?;
        let last = *self.months.last().expect("non-empty");
        dates
            .iter()
            .map(|&d| {
                if d <= last_pre_covid || d < first {
                    return Ok(0.0);
                }
                if d > last {
                    return Err(Error::Misaligned(format!(
                        "covid indicator {} ends at {last}, panel needs {d}",
                        self.kind
                    )));
                }
                let v = self.growth_at(d).expect("in range");
                if v.is_nan() {
                    Err(Error::Misaligned(format!("covid growth {} undefined at {d}", self.kind)))
                } else {
                    Ok(v)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn truncate3(x: f64) -> f64 {
        (x * 1000.0).trunc() / 1000.0
    }

    // monthly totals 2020-01 .. 2020-05
    const P: [f64; 5] = [2.0, 16.0, 196830.0, 876304.0, 718191.0];
    const H: [f64; 5] = [0.0, 0.0, 6700.0, 38399.0, 73150.0];
    const D: [f64; 5] = [0.0, 5.0, 4326.0, 55315.0, 41137.0];

    #[test]
    fn positive_growth_matches_table_values() {
        let v = growth_rate(&P, CovidKind::Positive);
        assert_abs_diff_eq!(v[2], 9.4175, epsilon = 5e-4);
        assert_abs_diff_eq!(v[3], 1.493, epsilon = 5e-4);
        assert_abs_diff_eq!(v[4], -0.199, epsilon = 5e-4);
    }

    #[test]
    fn hospitalization_uses_one_for_february() {
        let v = growth_rate(&H, CovidKind::Hospitalized);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 0.0, "both neighbours zero");
        assert_abs_diff_eq!(v[2], 6700f64.ln(), epsilon = 1e-12);
        // the monthly table prints growth truncated to three decimals
        assert_eq!(truncate3(v[2]), 8.809);
        assert_eq!(truncate3(v[3]), 1.745);
    }

    #[test]
    fn the_february_rule_is_specific_to_hospitalizations() {
        let v = growth_rate(&H, CovidKind::Death);
        assert!(v[2].is_nan());
        let d = growth_rate(&D, CovidKind::Death);
        assert!(d[1].is_nan(), "zero denominator before the first positive month");
        assert_abs_diff_eq!(d[2], (4326.0f64 / 5.0).ln(), epsilon = 1e-12);
        assert_eq!(truncate3(d[2]), 6.762);
        assert_eq!(truncate3(d[3]), 2.548);
    }

    #[test]
    fn constant_level_has_zero_growth() {
        let v = growth_rate(&[7.0; 6], CovidKind::Positive);
        assert!(v[0].is_nan(), "first month has an implicit zero predecessor");
        assert!(v[1..].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn drop_to_zero_is_undefined() {
        let v = growth_rate(&[0.0, 3.0, 0.0, 0.0], CovidKind::Positive);
        assert!(v[1].is_nan() && v[2].is_nan());
        assert_eq!(v[3], 0.0);
    }

    fn daily(days: &[(i32, u32, u32, f64)]) -> DailyCovidSeries {
        let mut s = DailyCovidSeries::default();
        for &(y, m, d, c) in days {
            s.dates.push(NaiveDate::from_ymd_opt(y, m, d).unwrap());
            s.positive_increase.push(c);
            s.hospitalized_increase.push(0.0);
            s.death_increase.push(0.0);
        }
        s
    }

    #[test]
    fn aggregation_sums_and_fills_gaps() {
        let s = daily(&[(2020, 1, 30, 1.0), (2020, 1, 31, 1.0), (2020, 3, 15, 5.0)]);
        let (months, level) = aggregate_monthly(&s, CovidKind::Positive).unwrap();
        assert_eq!(months.len(), 3);
        assert_eq!(level, vec![2.0, 0.0, 5.0]);
        assert!(aggregate_monthly(&DailyCovidSeries::default(), CovidKind::Positive).is_err());
    }

    #[test]
    fn aligned_growth_zeroes_the_pre_covid_sample() {
        let ind = CovidIndicator {
            kind: CovidKind::Positive,
            months: Month::range_inclusive(Month::new(2020, 1).unwrap(), Month::new(2020, 5).unwrap()),
            level: P.to_vec(),
            growth: growth_rate(&P, CovidKind::Positive),
        };
        let dates = Month::range_inclusive(Month::new(2019, 11).unwrap(), Month::new(2020, 4).unwrap());
        let v = ind.aligned_growth(&dates, Month::new(2020, 2).unwrap()).unwrap();
        assert_eq!(&v[..4], &[0.0; 4]);
        assert_abs_diff_eq!(v[4], 9.4175, epsilon = 5e-4);
        let too_long = Month::range_inclusive(Month::new(2020, 1).unwrap(), Month::new(2020, 7).unwrap());
        assert!(ind.aligned_growth(&too_long, Month::new(2020, 2).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn growth_is_scale_invariant(levels in proptest::collection::vec(1.0f64..1e6, 2..20), c in 1e-3f64..1e3) {
            let v = growth_rate(&levels, CovidKind::Positive);
            let scaled: Vec<f64> = levels.iter().map(|x| x * c).collect();
            let w = growth_rate(&scaled, CovidKind::Positive);
            for (a, b) in v.iter().zip(&w) {
                prop_assert!((a.is_nan() && b.is_nan()) || (a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn growth_reconstructs_levels(levels in proptest::collection::vec(1.0f64..1e6, 2..20)) {
            let v = growth_rate(&levels, CovidKind::Positive);
            let mut acc = 0.0;
            for t in 1..levels.len() {
                acc += v[t];
                let rebuilt = levels[0] * acc.exp();
                prop_assert!((rebuilt - levels[t]).abs() <= 1e-9 * levels[t]);
            }
        }
    }
}
