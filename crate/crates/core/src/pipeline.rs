//! End-to-end recipes that chain the individual stages: panel preparation,
//! COVID regressors, adjustment, factors and uncertainty.

use nalgebra::DMatrix;

use crate::covid::{CovidIndicator, CovidKind};
use crate::decovid::{decovid_panel, DecovidResult, DecovidSpec, ModelId};
use crate::error::{Error, Result};
use crate::factors::{pca_standardized, squared_panel_factor, FactorSet};
use crate::forecast::{build_predictors, ForecastConfig, PredictorInputs, PredictorMode, PredictorSet};
use crate::ingest::{DailyCovidSeries, RawPanel};
use crate::month::Month;
use crate::transform::{em_impute, standardize, transform_panel, EmConfig};
use crate::uncertainty::{covid_uncertainty, macro_uncertainty, UncertaintyRun};

/// Transformed, outlier-screened, imputed and standardized panel.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    /// Complete `T x N` standardized values.
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub outliers: usize,
    pub imputed: usize,
    pub em_iterations: usize,
    pub warnings: Vec<String>,
}

impl PreparedPanel {
    pub fn index_of(&self, m: Month) -> Option<usize> {
        self.dates.iter().position(|&d| d == m)
    }
}

/// Transforms `raw`, screens outliers using only months up to
/// `last_pre_covid`, keeps rows inside `sample` (inclusive), drops series
/// with fewer than `min_obs` observed values there, standardizes and fills
/// the remaining gaps by EM with `em_rank` factors.
pub fn prepare_panel(
    raw: &RawPanel,
    last_pre_covid: Month,
    sample: Option<(Month, Month)>,
    em_rank: usize,
    min_obs: usize,
) -> Result<PreparedPanel> {
    let first = *raw.dates.first().ok_or_else(|| Error::Empty("macro panel".into()))?;
    let tp = transform_panel(raw, Some((first, last_pre_covid)))?;
    let rows: Vec<usize> = (0..tp.dates.len())
        .filter(|&i| sample.is_none_or(|(a, b)| tp.dates[i] >= a && tp.dates[i] <= b))
        .collect();
    if rows.is_empty() {
        return Err(Error::Empty("no transformed rows inside the sample window".into()));
    }
    let mut warnings = tp.warnings.clone();
    let mut keep = Vec::new();
    for j in 0..tp.names.len() {
        let obs = rows.iter().filter(|&&i| !tp.values[(i, j)].is_nan()).count();
        if obs < min_obs.max(2) {
            warnings.push(format!("{}: dropped, {obs} observations in sample", tp.names[j]));
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(Error::Empty("every series was dropped".into()));
    }
    let names: Vec<String> = keep.iter().map(|&j| tp.names[j].clone()).collect();
    let sub = DMatrix::from_fn(rows.len(), keep.len(), |i, j| tp.values[(rows[i], keep[j])]);
    let outliers = rows
        .iter()
        .map(|&i| keep.iter().filter(|&&j| tp.outlier_mask[(i, j)]).count())
        .sum();
    let std = standardize(&sub, &names)?;
    let imputed = std.values.iter().filter(|v| v.is_nan()).count();
    let rank = em_rank.min(rows.len().min(keep.len()).saturating_sub(1)).max(1);
    let em = em_impute(&std.values, &EmConfig::with_rank(rank))?;
    if !em.converged {
        warnings.push(format!("EM imputation stopped after {} iterations without converging", em.iterations));
    }
    Ok(PreparedPanel {
        dates: rows.iter().map(|&i| tp.dates[i]).collect(),
        names,
        values: em.values,
        means: std.means,
        sds: std.sds,
        outliers,
        imputed,
        em_iterations: em.iterations,
        warnings,
    })
}

/// COVID growth of `kind` on the panel's date index (zero up to
/// `last_pre_covid`).
pub fn covid_regressor(daily: &DailyCovidSeries, kind: CovidKind, dates: &[Month], last_pre_covid: Month) -> Result<Vec<f64>> {
    CovidIndicator::from_daily(daily, kind)?.aligned_growth(dates, last_pre_covid)
}

/// Settings shared by the adjustment and uncertainty recipes.
#[derive(Debug, Clone)]
pub struct AdjustSettings {
    pub model: ModelId,
    pub kind: CovidKind,
    pub q: usize,
    pub last_pre_covid: Month,
    pub macro_factors: usize,
    pub financial_factors: usize,
    pub forecast: ForecastConfig,
}

impl Default for AdjustSettings {
    fn default() -> Self {
        AdjustSettings {
            model: ModelId::M4,
            kind: CovidKind::Positive,
            q: 2,
            last_pre_covid: Month::new(2020, 2).expect("valid month"),
            macro_factors: 8,
            financial_factors: 4,
            forecast: ForecastConfig::default(),
        }
    }
}

/// Row index of `last_pre_covid`, or `None` when the sample ends before it.
fn outbreak_row(dates: &[Month], last_pre_covid: Month) -> Result<Option<usize>> {
    match dates.iter().position(|&d| d == last_pre_covid) {
        Some(t0) if t0 + 1 < dates.len() => Ok(Some(t0)),
        Some(_) => Ok(None),
        None if dates.last().is_some_and(|&d| d < last_pre_covid) => Ok(None),
        None => Err(Error::Misaligned(format!("sample does not contain {last_pre_covid}"))),
    }
}

/// Adjusts `values` with the configured design, or returns it unchanged
/// (wrapped with `None`) when there are no post-outbreak rows.
pub fn adjust(
    values: &DMatrix<f64>,
    names: &[String],
    dates: &[Month],
    v: &[f64],
    settings: &AdjustSettings,
) -> Result<(DMatrix<f64>, Option<DecovidResult>)> {
    match outbreak_row(dates, settings.last_pre_covid)? {
        None => Ok((values.clone(), None)),
        Some(t0) => {
            let spec = DecovidSpec::new(settings.model, settings.kind, t0).with_q(settings.q);
            let res = decovid_panel(values, names, &spec, v)?;
            Ok((res.x.clone(), Some(res)))
        }
    }
}

/// Adjusted panels, their factors and the forecasting predictors built
/// from them.
#[derive(Debug, Clone)]
pub struct AdjustedPredictors {
    /// Adjusted macro panel (the input itself without post-outbreak rows).
    pub x: DMatrix<f64>,
    pub adjustment: Option<DecovidResult>,
    pub macro_factors: FactorSet,
    pub financial_factors: Option<FactorSet>,
    pub predictors: PredictorSet,
}

/// Adjusts the macro (and financial) panel, extracts factors and assembles
/// the predictor set: `v^P`, `v^D` when the sample has post-outbreak rows,
/// the squared-panel factor otherwise.
pub fn adjusted_predictors(
    macro_panel: &PreparedPanel,
    financial: Option<&PreparedPanel>,
    daily: &DailyCovidSeries,
    settings: &AdjustSettings,
) -> Result<AdjustedPredictors> {
    let dates = &macro_panel.dates;
    if let Some(f) = financial {
        if &f.dates != dates {
            return Err(Error::Misaligned("financial and macro panels cover different months".into()));
        }
    }
    let v = covid_regressor(daily, settings.kind, dates, settings.last_pre_covid)?;
    let (x, adjustment) = adjust(&macro_panel.values, &macro_panel.names, dates, &v, settings)?;
    let fm = pca_standardized(&x, &macro_panel.names, settings.macro_factors)?;
    let ff = match financial {
        Some(f) => {
            let (xf, _) = adjust(&f.values, &f.names, dates, &v, settings)?;
            Some(pca_standardized(&xf, &f.names, settings.financial_factors)?)
        }
        None => None,
    };
    let (mode, g_m, v_p, v_d) = if adjustment.is_some() {
        let v_p = covid_regressor(daily, CovidKind::Positive, dates, settings.last_pre_covid)?;
        let v_d = covid_regressor(daily, CovidKind::Death, dates, settings.last_pre_covid)?;
        (PredictorMode::PostCovid, None, Some(v_p), Some(v_d))
    } else {
        let std = standardize(&x, &macro_panel.names)?;
        (PredictorMode::PreCovid, Some(squared_panel_factor(&std.values)?), None, None)
    };
    let predictors = build_predictors(
        PredictorInputs {
            macro_factors: &fm.f,
            financial_factors: ff.as_ref().map(|f| &f.f),
            g_m: g_m.as_deref(),
            v_p: v_p.as_deref(),
            v_d: v_d.as_deref(),
        },
        mode,
    )?;
    Ok(AdjustedPredictors {
        x,
        adjustment,
        macro_factors: fm,
        financial_factors: ff,
        predictors,
    })
}

/// Both uncertainty indices and their difference.
#[derive(Debug, Clone)]
pub struct UncertaintyDecomposition {
    pub predictors: PredictorSet,
    pub macro_factors: FactorSet,
    pub financial_factors: Option<FactorSet>,
    /// Built from the unadjusted panel `X`.
    pub unadjusted: UncertaintyRun,
    /// Built from the adjusted panel `x`.
    pub adjusted: UncertaintyRun,
    /// `U(X) - U(x)`.
    pub covid: Vec<f64>,
    pub adjustment: Option<DecovidResult>,
}

/// Factors come from the adjusted panels; the same predictors serve both
/// target panels so the difference isolates the targets.
pub fn uncertainty_decomposition(
    macro_panel: &PreparedPanel,
    financial: Option<&PreparedPanel>,
    daily: &DailyCovidSeries,
    settings: &AdjustSettings,
) -> Result<UncertaintyDecomposition> {
    let ap = adjusted_predictors(macro_panel, financial, daily, settings)?;
    let (names, dates) = (&macro_panel.names, &macro_panel.dates);
    let unadjusted = macro_uncertainty(&macro_panel.values, names, dates, &ap.predictors, &settings.forecast, "U(X)")?;
    let adjusted = macro_uncertainty(&ap.x, names, dates, &ap.predictors, &settings.forecast, "U(x)")?;
    let covid = covid_uncertainty(&unadjusted.index, &adjusted.index)?;
    Ok(UncertaintyDecomposition {
        predictors: ap.predictors,
        macro_factors: ap.macro_factors,
        financial_factors: ap.financial_factors,
        unadjusted,
        adjusted,
        covid,
        adjustment: ap.adjustment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{simulate_dgp, DgpConfig};

    #[test]
    fn prepare_matches_manual_chain_on_complete_panel() {
        let cfg = DgpConfig {
            n: 20,
            t: 140,
            t0: 130,
            seed: 3,
            ..DgpConfig::default()
        };
        let sim = simulate_dgp(&cfg).unwrap();
        let raw = sim.to_raw_panel();
        let last_pre = sim.dates[cfg.t0];
        let p = prepare_panel(&raw, last_pre, None, 3, 10).unwrap();
        assert_eq!(p.values.shape(), (140, 20));
        assert_eq!(p.imputed, p.outliers);
        for j in 0..20 {
            let col: Vec<f64> = p.values.column(j).iter().copied().collect();
            assert!(crate::linalg::mean(&col).abs() < 1e-6);
        }
    }

    #[test]
    fn sample_before_outbreak_uses_pre_mode() {
        let cfg = DgpConfig {
            n: 15,
            t: 160,
            t0: 150,
            seed: 5,
            ..DgpConfig::default()
        };
        let sim = simulate_dgp(&cfg).unwrap();
        let raw = sim.to_raw_panel();
        let daily = sim.to_daily_covid(cfg.t0);
        let last_pre = sim.dates[cfg.t0];
        let p = prepare_panel(&raw, last_pre, Some((sim.dates[0], last_pre)), 2, 10).unwrap();
        let settings = AdjustSettings {
            last_pre_covid: last_pre,
            macro_factors: 2,
            financial_factors: 1,
            ..AdjustSettings::default()
        };
        let d = uncertainty_decomposition(&p, None, &daily, &settings).unwrap();
        assert_eq!(d.predictors.mode, PredictorMode::PreCovid);
        assert!(d.adjustment.is_none());
        assert!(d.covid.iter().filter(|v| !v.is_nan()).all(|v| v.abs() < 1e-12));
    }
}
