//! Parsers for the two external CSV layouts: FRED-MD style monthly panels and
//! the covidtracking daily national history file.
//!
//! Missing cells are stored as `NaN`; an empty cell, `NA` and `NaN` are all
//! read as missing.

use std::collections::HashMap;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::covid::CovidKind;
use crate::error::{Error, Result};
use crate::month::Month;
use crate::transform::Tcode;

/// A row the parser skipped instead of turning into an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

/// A monthly panel as read from disk, before any transformation.
#[derive(Debug, Clone)]
pub struct RawPanel {
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    pub tcodes: Vec<Tcode>,
    /// `T x N`, `NaN` marks a missing cell.
    pub values: DMatrix<f64>,
    /// Blank rows dropped during parsing (e.g. trailing `,,,` lines).
    pub skipped: Vec<SkippedRow>,
}

impl RawPanel {
    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Every column must carry at least `min` observed values.
    pub fn check_coverage(&self, min: usize) -> Result<()> {
        for (j, name) in self.names.iter().enumerate() {
            let observed = self.values.column(j).iter().filter(|v| !v.is_nan()).count();
            if observed < min {
                return Err(Error::insufficient(format!("series `{name}`"), min, observed));
            }
        }
        Ok(())
    }

    /// Writes the panel back out in the same layout `parse_fredmd` reads.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sasdate");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str("\nTransform:");
        for t in &self.tcodes {
            out.push_str(&format!(",{}", t.code()));
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            out.push_str(&format!("{}/1/{}", d.month(), d.year()));
            for j in 0..self.n_series() {
                out.push(',');
                let v = self.values[(i, j)];
                if !v.is_nan() {
                    out.push_str(&format!("{v:?}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn is_missing_token(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

fn parse_cell(s: &str, line: usize) -> Result<f64> {
    if is_missing_token(s) {
        return Ok(f64::NAN);
    }
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(line, format!("non-numeric value `{s}`")))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

/// Parses a FRED-MD style CSV: header row, a `Transform:` code row, then one
/// row per month dated `m/d/yyyy` or `yyyy-mm-dd`.
pub fn parse_fredmd(csv_text: &str) -> Result<RawPanel> {
    let mut records = csv_reader(csv_text).into_records();
    let next = |it: &mut csv::StringRecordsIntoIter<&[u8]>| -> Result<Option<csv::StringRecord>> {
        it.next()
            .transpose()
            .map_err(|e| Error::format(0, e.to_string()))
    };

    let header = next(&mut records)?.ok_or_else(|| Error::format(1, "empty file"))?;
    if header.len() < 2 {
        return Err(Error::format(line_of(&header), "header must name at least one series"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if let Some(pos) = names.iter().position(|n| n.is_empty()) {
        return Err(Error::format(line_of(&header), format!("empty series name in column {}", pos + 2)));
    }
    let mut seen = HashMap::new();
    for n in &names {
        if seen.insert(n.as_str(), ()).is_some() {
            return Err(Error::format(line_of(&header), format!("duplicate series name `{n}`")));
        }
    }
    let n = names.len();

    let tc_row = next(&mut records)?.ok_or_else(|| Error::format(2, "missing transform-code row"))?;
    let tc_line = line_of(&tc_row);
    if !tc_row.get(0).unwrap_or("").to_ascii_lowercase().starts_with("transform") {
        return Err(Error::format(tc_line, "second row must start with a `Transform:` marker"));
    }
    if tc_row.len() != n + 1 {
        return Err(Error::format(tc_line, format!("expected {n} transform codes, got {}", tc_row.len() - 1)));
    }
    let tcodes = tc_row
        .iter()
        .skip(1)
        .map(|s| {
            let code: u8 = s
                .parse()
                .map_err(|_| Error::format(tc_line, format!("non-integer transform code `{s}`")))?;
            Tcode::from_code(code).ok_or_else(|| Error::format(tc_line, format!("transform code {code} outside 1..=7")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut dates: Vec<Month> = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    let mut skipped = Vec::new();
    while let Some(rec) = next(&mut records)? {
        let line = line_of(&rec);
        if rec.iter().all(|c| c.is_empty()) {
            skipped.push(SkippedRow {
                line,
                reason: "blank row".into(),
            });
            continue;
        }
        if rec.len() != n + 1 {
            return Err(Error::format(line, format!("expected {} fields, got {}", n + 1, rec.len())));
        }
        let date: Month = rec[0]
            .parse()
            .map_err(|_| Error::format(line, format!("unparseable date `{}`", &rec[0])))?;
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(Error::format(line, format!("duplicate month {date}")));
            }
            if date != prev.next() {
                return Err(Error::format(line, format!("month {date} does not follow {prev}")));
            }
        }
        dates.push(date);
        for cell in rec.iter().skip(1) {
            data.push(parse_cell(cell, line)?);
        }
    }
    if dates.is_empty() {
        return Err(Error::format(0, "no data rows"));
    }
    let values = DMatrix::from_row_slice(dates.len(), n, &data);
    Ok(RawPanel {
        dates,
        names,
        tcodes,
        values,
        skipped,
    })
}

/// Daily national COVID counts (non-negative increments).
#[derive(Debug, Clone, Default)]
pub struct DailyCovidSeries {
    pub dates: Vec<NaiveDate>,
    pub hospitalized_increase: Vec<f64>,
    pub positive_increase: Vec<f64>,
    pub death_increase: Vec<f64>,
    /// One entry per clamped negative revision.
    pub warnings: Vec<String>,
}

impl DailyCovidSeries {
    pub fn counts(&self, kind: CovidKind) -> &[f64] {
        match kind {
            CovidKind::Hospitalized => &self.hospitalized_increase,
            CovidKind::Positive => &self.positive_increase,
            CovidKind::Death => &self.death_increase,
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,hospitalizedIncrease,positiveIncrease,deathIncrease\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                self.dates[i].format("%Y-%m-%d"),
                self.hospitalized_increase[i],
                self.positive_increase[i],
                self.death_increase[i]
            ));
        }
        out
    }
}

const COVID_COLUMNS: [&str; 4] = ["date", "hospitalizedIncrease", "positiveIncrease", "deathIncrease"];

fn parse_day(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .map_err(|_| Error::format(line, format!("unparseable date `{s}`")))
}

/// Parses the covidtracking national history CSV. Rows may arrive in any
/// order and are returned ascending by date; missing counts are 0 and
/// negative revisions are clamped to 0 with a warning.
pub fn parse_covid_tracking(csv_text: &str) -> Result<DailyCovidSeries> {
    let mut records = csv_reader(csv_text).into_records();
    let header = records
        .next()
        .transpose()
        .map_err(|e| Error::format(0, e.to_string()))?
        .ok_or_else(|| Error::format(1, "empty file"))?;
    let idx: Vec<usize> = COVID_COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| Error::MissingColumn(c.to_string()))
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<(NaiveDate, [f64; 3], usize)> = Vec::new();
    let mut warnings = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::format(0, e.to_string()))?;
        let line = line_of(&rec);
        let date = parse_day(rec.get(idx[0]).unwrap_or(""), line)?;
        let mut counts = [0.0; 3];
        for (slot, &col) in counts.iter_mut().zip(&idx[1..]) {
            let v = parse_cell(rec.get(col).unwrap_or(""), line)?;
            *slot = if v.is_nan() { 0.0 } else { v };
        }
        for (k, c) in counts.iter_mut().enumerate() {
            if *c < 0.0 {
                warnings.push(format!(
                    "line {line}: negative {} {} on {date} clamped to 0",
                    COVID_COLUMNS[k + 1],
                    c
                ));
                *c = 0.0;
            }
        }
        rows.push((date, counts, line));
    }
    rows.sort_by_key(|r| r.0);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::format(w[1].2, format!("duplicate date {}", w[1].0)));
        }
    }
    let mut out = DailyCovidSeries {
        warnings,
        ..Default::default()
    };
    for (d, c, _) in rows {
        out.dates.push(d);
        out.hospitalized_increase.push(c[0]);
        out.positive_increase.push(c[1]);
        out.death_increase.push(c[2]);
    }
    Ok(out)
}
