//! Stationarity transforms, interquartile outlier screening, EM imputation of
//! missing cells and column standardization.

use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::RawPanel;
use crate::month::Month;

/// FRED-MD transformation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tcode {
    /// 1: no transformation
    Level,
    /// 2: first difference
    Diff,
    /// 3: second difference
    Diff2,
    /// 4: log
    Log,
    /// 5: first difference of log
    LogDiff,
    /// 6: second difference of log
    LogDiff2,
    /// 7: first difference of the percent change
    PctChangeDiff,
}

impl Tcode {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => Tcode::Level,
            2 => Tcode::Diff,
            3 => Tcode::Diff2,
            4 => Tcode::Log,
            5 => Tcode::LogDiff,
            6 => Tcode::LogDiff2,
            7 => Tcode::PctChangeDiff,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        match self {
            Tcode::Level => 1,
            Tcode::Diff => 2,
            Tcode::Diff2 => 3,
            Tcode::Log => 4,
            Tcode::LogDiff => 5,
            Tcode::LogDiff2 => 6,
            Tcode::PctChangeDiff => 7,
        }
    }

    /// Number of leading observations the transform leaves undefined.
    pub fn lost_obs(self) -> usize {
        match self {
            Tcode::Level | Tcode::Log => 0,
            Tcode::Diff | Tcode::LogDiff => 1,
            Tcode::Diff2 | Tcode::LogDiff2 | Tcode::PctChangeDiff => 2,
        }
    }

    fn uses_log(self) -> bool {
        matches!(self, Tcode::Log | Tcode::LogDiff | Tcode::LogDiff2)
    }
}

fn diff(x: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for t in 1..x.len() {
        out[t] = x[t] - x[t - 1];
    }
    out
}

fn transform_series(series: &[f64], tcode: Tcode) -> std::result::Result<Vec<f64>, usize> {
    let base: Vec<f64> = if tcode.uses_log() {
        series
            .iter()
            .enumerate()
            .map(|(t, &v)| match v {
                v if v.is_nan() => Ok(f64::NAN),
                v if v > 0.0 => Ok(v.ln()),
                _ => Err(t),
            })
            .collect::<std::result::Result<_, _>>()?
    } else {
        series.to_vec()
    };
    Ok(match tcode {
        Tcode::Level | Tcode::Log => base,
        Tcode::Diff | Tcode::LogDiff => diff(&base),
        Tcode::Diff2 | Tcode::LogDiff2 => diff(&diff(&base)),
        Tcode::PctChangeDiff => {
            let mut growth = vec![f64::NAN; base.len()];
            for t in 1..base.len() {
                if base[t - 1] != 0.0 {
                    growth[t] = base[t] / base[t - 1] - 1.0;
                }
            }
            diff(&growth)
        }
    })
}

/// Applies a transform code. Leading undefined entries are `NaN`.
pub fn apply_tcode(series: &[f64], tcode: Tcode) -> Result<Vec<f64>> {
    transform_series(series, tcode).map_err(|t| Error::Domain {
        series: "<unnamed>".into(),
        date: format!("t={t}"),
        message: format!("non-positive value {} under log transform", series[t]),
    })
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Result of the interquartile outlier rule.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierMask {
    pub mask: Vec<bool>,
    /// Set when the rule could not fire (zero interquartile range).
    pub warning: Option<String>,
}

impl OutlierMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Multiple of the interquartile range beyond which a deviation from the
/// median counts as an outlier.
pub const OUTLIER_IQR_MULTIPLE: f64 = 10.0;

/// Flags `|x - median| > 10 * (q75 - q25)` over the whole series.
pub fn detect_outliers(series: &[f64]) -> Result<OutlierMask> {
    detect_outliers_in(series, 0..series.len())
}

/// Outlier rule with quantiles computed over, and flags restricted to, `window`.
pub fn detect_outliers_in(series: &[f64], window: Range<usize>) -> Result<OutlierMask> {
    let window = window.start.min(series.len())..window.end.min(series.len());
    let mut obs: Vec<f64> = series[window.clone()].iter().copied().filter(|v| !v.is_nan()).collect();
    if obs.len() < 4 {
        return Err(Error::insufficient("outlier detection", 4, obs.len()));
    }
    obs.sort_by(f64::total_cmp);
    let median = quantile_sorted(&obs, 0.5);
    let iqr = quantile_sorted(&obs, 0.75) - quantile_sorted(&obs, 0.25);
    let mut mask = vec![false; series.len()];
    if iqr <= 0.0 {
        return Ok(OutlierMask {
            mask,
            warning: Some("zero interquartile range; no outliers flagged".into()),
        });
    }
    let limit = OUTLIER_IQR_MULTIPLE * iqr;
    for t in window {
        let v = series[t];
        mask[t] = !v.is_nan() && (v - median).abs() > limit;
    }
    Ok(OutlierMask { mask, warning: None })
}

/// Settings for [`em_impute`].
#[derive(Debug, Clone)]
pub struct EmConfig {
    /// Number of principal components in the common-component fit.
    pub rank: usize,
    /// Convergence threshold on the max absolute change of imputed cells.
    pub tol: f64,
    pub max_iter: usize,
}

impl EmConfig {
    pub fn with_rank(rank: usize) -> Self {
        EmConfig {
            rank,
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

/// Output of [`em_impute`].
#[derive(Debug, Clone)]
pub struct EmResult {
    pub values: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max absolute change of imputed cells, per iteration.
    pub max_changes: Vec<f64>,
    /// Frobenius norm of the change of imputed cells, per iteration.
    pub frobenius_changes: Vec<f64>,
}

/// Best rank-`r` approximation of a column-centered matrix.
fn low_rank_fit(c: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let (t, n) = c.shape();
    let top = |gram: DMatrix<f64>| {
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let dim = eig.eigenvectors.nrows();
        let mut basis = DMatrix::zeros(dim, r);
        for (k, &idx) in order.iter().take(r).enumerate() {
            basis.set_column(k, &eig.eigenvectors.column(idx));
        }
        basis
    };
    if n <= t {
        let v = top(c.transpose() * c);
        c * &v * v.transpose()
    } else {
        let u = top(c * c.transpose());
        &u * (u.transpose() * c)
    }
}

/// Fills `NaN` cells by iterating: column-mean start, rank-`r` principal
/// component fit of the demeaned panel, replace missing cells by the fit.
/// Observed cells are never altered.
pub fn em_impute(panel: &DMatrix<f64>, cfg: &EmConfig) -> Result<EmResult> {
    let (t, n) = panel.shape();
    if cfg.rank >= t.min(n) {
        return Err(Error::invalid(format!("EM rank {} must be below min(T, N) = {}", cfg.rank, t.min(n))));
    }
    let missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..t).map(move |i| (i, j)))
        .filter(|&(i, j)| panel[(i, j)].is_nan())
        .collect();
    for j in 0..n {
        if panel.column(j).iter().all(|v| v.is_nan()) {
            return Err(Error::Empty(format!("column {j} has no observed entries")));
        }
    }
    for i in 0..t {
        if panel.row(i).iter().all(|v| v.is_nan()) {
            return Err(Error::Empty(format!("row {i} has no observed entries")));
        }
    }
    if missing.is_empty() {
        return Ok(EmResult {
            values: panel.clone(),
            iterations: 1,
            converged: true,
            max_changes: vec![0.0],
            frobenius_changes: vec![0.0],
        });
    }

    let mut z = panel.clone();
    for j in 0..n {
        let obs: Vec<f64> = panel.column(j).iter().copied().filter(|v| !v.is_nan()).collect();
        let m = obs.iter().sum::<f64>() / obs.len() as f64;
        for i in 0..t {
            if z[(i, j)].is_nan() {
                z[(i, j)] = m;
            }
        }
    }

    let mut max_changes = Vec::new();
    let mut frobenius_changes = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let means: Vec<f64> = (0..n).map(|j| z.column(j).mean()).collect();
        let mut c = z.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        let fit = low_rank_fit(&c, cfg.rank);
        let mut max_change: f64 = 0.0;
        let mut sq = 0.0;
        for &(i, j) in &missing {
            let new = fit[(i, j)] + means[j];
            let d = new - z[(i, j)];
            max_change = max_change.max(d.abs());
            sq += d * d;
            z[(i, j)] = new;
        }
        max_changes.push(max_change);
        frobenius_changes.push(sq.sqrt());
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(EmResult {
        values: z,
        iterations,
        converged,
        max_changes,
        frobenius_changes,
    })
}

/// Column-standardized panel with the constants needed to undo it.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Per-column mean and sample sd (n-1) over observed cells.
pub fn column_moments(panel: &DMatrix<f64>, names: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = panel.ncols();
    let moments: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            let obs: Vec<f64> = panel.column(j).iter().copied().filter(|v| !v.is_nan()).collect();
            if obs.len() < 2 {
                return Err(Error::insufficient(format!("standardizing `{name}`"), 2, obs.len()));
            }
            let m = crate::linalg::mean(&obs);
            let sd = crate::linalg::sample_sd(&obs);
            if !(sd > 0.0) || sd <= 1e-14 * m.abs().max(1.0) {
                return Err(Error::ZeroVariance(name));
            }
            Ok((m, sd))
        })
        .collect();
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    for m in moments {
        let (mu, sd) = m?;
        means.push(mu);
        sds.push(sd);
    }
    Ok((means, sds))
}

/// Demeans and scales each column to unit sample sd over its observed support.
pub fn standardize(panel: &DMatrix<f64>, names: &[String]) -> Result<Standardized> {
    let (means, sds) = column_moments(panel, names)?;
    let mut values = panel.clone();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        col.apply(|v| *v = (*v - means[j]) / sds[j]);
    }
    Ok(Standardized { values, means, sds })
}

pub fn destandardize(values: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    let mut out = values.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.apply(|v| *v = *v * sds[j] + means[j]);
    }
    out
}

/// A panel after transform codes and outlier screening.
#[derive(Debug, Clone)]
pub struct TransformedPanel {
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    /// `T' x N`, outliers and undefined cells are `NaN`.
    pub values: DMatrix<f64>,
    pub outlier_mask: DMatrix<bool>,
    /// Observed-support moments of `values`.
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TransformedPanel {
    pub fn standardized(&self) -> DMatrix<f64> {
        let mut out = self.values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - self.means[j]) / self.sds[j]);
        }
        out
    }

    pub fn index_of(&self, m: Month) -> Option<usize> {
        self.dates.iter().position(|&d| d == m)
    }
}

/// Applies each series' transform code, trims the rows lost to differencing,
/// and marks interquartile outliers as missing. Quantiles use the rows whose
/// dates fall in `outlier_window` (the whole sample when `None`).
pub fn transform_panel(raw: &RawPanel, outlier_window: Option<(Month, Month)>) -> Result<TransformedPanel> {
    let trim = raw.tcodes.iter().map(|t| t.lost_obs()).max().unwrap_or(0);
    let t_out = raw.n_obs().saturating_sub(trim);
    let n = raw.n_series();
    if t_out == 0 {
        return Err(Error::insufficient("transformed panel", trim + 1, raw.n_obs()));
    }
    let dates = raw.dates[trim..].to_vec();
    let window = match outlier_window {
        None => 0..t_out,
        Some((a, b)) => {
            let start = dates.iter().position(|&d| d >= a).unwrap_or(t_out);
            let end = dates.iter().rposition(|&d| d <= b).map(|i| i + 1).unwrap_or(0);
            start..end.max(start)
        }
    };

    let columns: Vec<Result<(Vec<f64>, OutlierMask)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let series: Vec<f64> = raw.values.column(j).iter().copied().collect();
            let tr = transform_series(&series, raw.tcodes[j]).map_err(|t| Error::Domain {
                series: raw.names[j].clone(),
                date: raw.dates[t].to_string(),
                message: format!("non-positive value {} under log transform", series[t]),
            })?;
            let mut tr = tr[trim..].to_vec();
            let mask = detect_outliers_in(&tr, window.clone()).map_err(|e| match e {
                Error::InsufficientData { required, actual, .. } => {
                    Error::insufficient(format!("outlier screening of `{}`", raw.names[j]), required, actual)
                }
                other => other,
            })?;
            for (v, &m) in tr.iter_mut().zip(&mask.mask) {
                if m {
                    *v = f64::NAN;
                }
            }
            Ok((tr, mask))
        })
        .collect();

    let mut values = DMatrix::from_element(t_out, n, f64::NAN);
    let mut outlier_mask = DMatrix::from_element(t_out, n, false);
    let mut warnings = Vec::new();
    for (j, col) in columns.into_iter().enumerate() {
        let (tr, mask) = col?;
        for i in 0..t_out {
            values[(i, j)] = tr[i];
            outlier_mask[(i, j)] = mask.mask[i];
        }
        if let Some(w) = mask.warning {
            warnings.push(format!("{}: {w}", raw.names[j]));
        }
    }
    let (means, sds) = column_moments(&values, &raw.names)?;
    Ok(TransformedPanel {
        dates,
        names: raw.names.clone(),
        values,
        outlier_mask,
        means,
        sds,
        warnings,
    })
}
