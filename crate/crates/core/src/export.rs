//! CSV writers for dated result tables. The first column is an ISO date
//! (first day of the month), numbers use the shortest round-trip format.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::month::Month;

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        first = false;
        if c.contains([',', '"', '\n']) {
            let _ = write!(out, "\"{}\"", c.replace('"', "\"\""));
        } else {
            out.push_str(&c);
        }
    }
    out.push('\n');
}

pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn iso_date(m: Month) -> String {
    m.first_day().format("%Y-%m-%d").to_string()
}

/// `date,<columns..>` followed by one row per month.
pub fn dated_matrix_csv(dates: &[Month], columns: &[String], values: &DMatrix<f64>) -> String {
    assert_eq!(dates.len(), values.nrows(), "one date per row");
    assert_eq!(columns.len(), values.ncols(), "one name per column");
    let mut out = String::new();
    push_row(&mut out, std::iter::once("date".to_string()).chain(columns.iter().cloned()));
    for (i, d) in dates.iter().enumerate() {
        push_row(
            &mut out,
            std::iter::once(iso_date(*d)).chain(values.row(i).iter().map(|&x| format_number(x))),
        );
    }
    out
}

pub fn dated_series_csv(dates: &[Month], columns: &[&str], series: &[&[f64]]) -> String {
    let names: Vec<String> = columns.iter().map(|s| s.to_string()).collect();
    let m = DMatrix::from_fn(dates.len(), series.len(), |i, j| series[j][i]);
    dated_matrix_csv(dates, &names, &m)
}

/// Plain table with string cells and a header.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    push_row(&mut out, header.iter().map(|s| s.to_string()));
    for r in rows {
        push_row(&mut out, r.iter().cloned());
    }
    out
}
