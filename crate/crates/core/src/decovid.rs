//! Regression-based removal of COVID variation from each series.
//!
//! Post-outbreak observations are regressed on a constant, an outbreak-month
//! dummy and current/lagged COVID growth `v`, according to one of four
//! designs. The fit is the COVID-adjusted mean `mu1`; before the outbreak
//! the mean `mu0` is the pre-sample average. The adjusted panel is
//! `x = X - mu0` pre-outbreak and `x = X - mu1` afterwards.
//!
//! | model | outbreak dummy | `v` at the outbreak month in lags | contemporaneous `v` |
//! |-------|----------------|-----------------------------------|---------------------|
//! | 1     | yes            | zeroed                            | no                  |
//! | 2     | yes            | kept                              | no                  |
//! | 3     | yes            | kept                              | yes                 |
//! | 4     | no             | kept                              | yes                 |
//!
//! Model 1 also replaces full-sample interquartile outliers by the
//! pre-outbreak mean before fitting.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::covid::CovidKind;
use crate::error::{Error, Result};
use crate::linalg::ols_named;
use crate::transform::detect_outliers;

/// One of the four de-covid regression designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
}

impl ModelId {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(ModelId::M1),
            2 => Ok(ModelId::M2),
            3 => Ok(ModelId::M3),
            4 => Ok(ModelId::M4),
            _ => Err(Error::invalid(format!("model id {n} is not one of 1, 2, 3, 4"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ModelId::M1 => 1,
            ModelId::M2 => 2,
            ModelId::M3 => 3,
            ModelId::M4 => 4,
        }
    }

    pub fn has_outbreak_dummy(self) -> bool {
        self != ModelId::M4
    }

    pub fn has_contemporaneous_v(self) -> bool {
        matches!(self, ModelId::M3 | ModelId::M4)
    }

    /// Model 1 treats the outbreak month's growth as zero wherever it appears.
    pub fn zeroes_outbreak_v(self) -> bool {
        self == ModelId::M1
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.number())
    }
}

/// Which design to use and where the outbreak falls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecovidSpec {
    pub model: ModelId,
    /// Number of lags of `v`.
    pub q: usize,
    pub kind: CovidKind,
    /// Row index of the last pre-outbreak month.
    pub t0: usize,
}

impl DecovidSpec {
    pub fn new(model: ModelId, kind: CovidKind, t0: usize) -> Self {
        DecovidSpec { model, q: 2, kind, t0 }
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    /// Names of the COVID regressors (outbreak dummy and `v` terms), excluding
    /// any constant or level shift.
    pub fn covid_regressor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.model.has_outbreak_dummy() {
            names.push("D".to_string());
        }
        if self.model.has_contemporaneous_v() {
            names.push("v_t".to_string());
        }
        names.extend((1..=self.q).map(|l| format!("v_t-{l}")));
        names
    }

    /// COVID regressor values at row `t` of a sample whose aligned growth
    /// series is `v` (zero before the outbreak).
    pub(crate) fn covid_regressors_at(&self, v: &[f64], t: usize) -> Vec<f64> {
        let outbreak = self.t0 + 1;
        let lagged = |l: usize| -> f64 {
            if t < l {
                return 0.0;
            }
            let s = t - l;
            if s <= self.t0 || (self.model.zeroes_outbreak_v() && s == outbreak) {
                0.0
            } else {
                v[s]
            }
        };
        let mut row = Vec::with_capacity(self.q + 2);
        if self.model.has_outbreak_dummy() {
            row.push(if t == outbreak { 1.0 } else { 0.0 });
        }
        if self.model.has_contemporaneous_v() {
            row.push(lagged(0));
        }
        row.extend((1..=self.q).map(lagged));
        row
    }

    pub(crate) fn validate(&self, n_obs: usize, v_len: usize) -> Result<()> {
        if v_len != n_obs {
            return Err(Error::Misaligned(format!("covid growth has {v_len} rows, panel has {n_obs}")));
        }
        if self.t0 + 1 >= n_obs {
            return Err(Error::invalid(format!(
                "last pre-outbreak row {} leaves no post-outbreak sample in {n_obs} rows",
                self.t0
            )));
        }
        if self.q > self.t0 + 1 {
            return Err(Error::invalid(format!(
                "q = {} lags exceed the {} rows of history before the outbreak",
                self.q,
                self.t0 + 1
            )));
        }
        Ok(())
    }
}

/// Post-outbreak regressor matrix with named columns.
#[derive(Debug, Clone)]
pub struct Design {
    pub matrix: DMatrix<f64>,
    pub names: Vec<String>,
    /// Sample rows the design covers.
    pub rows: Range<usize>,
}

/// Regressors `[1, D_t, v_t, v_{t-1}, .., v_{t-q}]` (per model) over the
/// post-outbreak rows. `v` is the growth series aligned to the full sample.
pub fn build_design(spec: &DecovidSpec, v: &[f64]) -> Result<Design> {
    spec.validate(v.len(), v.len())?;
    let rows = spec.t0 + 1..v.len();
    let mut names = vec!["const".to_string()];
    names.extend(spec.covid_regressor_names());
    let k = names.len();
    let mut matrix = DMatrix::zeros(rows.len(), k);
    for (i, t) in rows.clone().enumerate() {
        matrix[(i, 0)] = 1.0;
        for (j, x) in spec.covid_regressors_at(v, t).into_iter().enumerate() {
            matrix[(i, j + 1)] = x;
        }
    }
    Ok(Design { matrix, names, rows })
}

/// Adjustment of one series.
#[derive(Debug, Clone)]
pub struct SeriesFit {
    /// Pre-outbreak mean.
    pub mu0: f64,
    /// Fitted COVID-adjusted mean over the post-outbreak rows.
    pub mu1: Vec<f64>,
    /// Adjusted series over the full sample.
    pub x: Vec<f64>,
    pub beta: Vec<f64>,
}

fn observed_mean(xs: &[f64]) -> f64 {
    let (s, n) = xs
        .iter()
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Fits the design to the post-outbreak part of `series` by least squares on
/// observed rows and returns the adjusted series.
pub fn decovid_series(series: &[f64], design: &Design, t0: usize) -> Result<SeriesFit> {
    if design.rows.start != t0 + 1 || design.rows.end != series.len() {
        return Err(Error::Misaligned(format!(
            "design covers rows {:?}, series has {} rows with outbreak after row {t0}",
            design.rows,
            series.len()
        )));
    }
    let mu0 = observed_mean(&series[..=t0]);
    let k = design.names.len();
    let post = &series[design.rows.clone()];
    let observed: Vec<usize> = (0..post.len()).filter(|&i| !post[i].is_nan()).collect();

    let beta = if observed.iter().all(|&i| post[i] == 0.0) {
        DVector::zeros(k)
    } else {
        let x = DMatrix::from_fn(observed.len(), k, |i, j| design.matrix[(observed[i], j)]);
        let y = DVector::from_iterator(observed.len(), observed.iter().map(|&i| post[i]));
        ols_named(&x, &y, Some(&design.names))?.coefficients
    };
    let mu1: Vec<f64> = (&design.matrix * &beta).iter().copied().collect();
    let x = series
        .iter()
        .enumerate()
        .map(|(t, &v)| if t <= t0 { v - mu0 } else { v - mu1[t - t0 - 1] })
        .collect();
    Ok(SeriesFit {
        mu0,
        mu1,
        x,
        beta: beta.iter().copied().collect(),
    })
}

/// Variant estimated on the whole sample with a post-outbreak level dummy:
/// regress on `[1, 1{t > T0}, covid regressors]`. The intercept plays the
/// role of `mu0`.
pub fn decovid_series_full_sample(series: &[f64], spec: &DecovidSpec, v: &[f64]) -> Result<SeriesFit> {
    spec.validate(series.len(), v.len())?;
    let mut names = vec!["const".to_string(), "post".to_string()];
    names.extend(spec.covid_regressor_names());
    let k = names.len();
    let t_all = series.len();
    let full = DMatrix::from_fn(t_all, k, |t, j| match j {
        0 => 1.0,
        1 => f64::from(u8::from(t > spec.t0)),
        _ => spec.covid_regressors_at(v, t)[j - 2],
    });
    let observed: Vec<usize> = (0..t_all).filter(|&t| !series[t].is_nan()).collect();
    let x = DMatrix::from_fn(observed.len(), k, |i, j| full[(observed[i], j)]);
    let y = DVector::from_iterator(observed.len(), observed.iter().map(|&t| series[t]));
    let beta = ols_named(&x, &y, Some(&names))?.coefficients;
    let fitted = &full * &beta;
    let mu0 = beta[0];
    let mu1 = fitted.rows(spec.t0 + 1, t_all - spec.t0 - 1).iter().copied().collect();
    let x = series.iter().zip(fitted.iter()).map(|(s, f)| s - f).collect();
    Ok(SeriesFit {
        mu0,
        mu1,
        x,
        beta: beta.iter().copied().collect(),
    })
}

/// Where the de-covid regression is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecovidMethod {
    /// Fit on post-outbreak rows only.
    #[default]
    PostSample,
    /// Fit on the full sample with a post-outbreak level dummy.
    FullSample,
}

/// Adjusted panel plus everything needed to inspect the adjustment.
#[derive(Debug, Clone)]
pub struct DecovidResult {
    pub names: Vec<String>,
    pub mu0: Vec<f64>,
    /// `T_post x N` fitted COVID component.
    pub mu1: DMatrix<f64>,
    /// `T x N` adjusted panel.
    pub x: DMatrix<f64>,
    /// Coefficients, one column per series (`k x N`).
    pub betas: DMatrix<f64>,
    pub design: Design,
    /// Number of Model 1 outlier replacements per series.
    pub outliers_replaced: Vec<usize>,
}

/// Replaces full-sample interquartile outliers by the pre-outbreak mean of
/// the remaining observations.
fn replace_outliers_with_pre_mean(series: &[f64], t0: usize) -> Result<(Vec<f64>, usize)> {
    let mask = detect_outliers(series)?;
    let clean_pre: Vec<f64> = series[..=t0]
        .iter()
        .zip(&mask.mask)
        .filter(|(v, &m)| !m && !v.is_nan())
        .map(|(v, _)| *v)
        .collect();
    let fill = observed_mean(&clean_pre);
    let mut out = series.to_vec();
    for (v, &m) in out.iter_mut().zip(&mask.mask) {
        if m {
            *v = fill;
        }
    }
    Ok((out, mask.count()))
}

/// Applies [`decovid_series`] to every column (in parallel).
pub fn decovid_panel(panel: &DMatrix<f64>, names: &[String], spec: &DecovidSpec, v: &[f64]) -> Result<DecovidResult> {
    decovid_panel_with(panel, names, spec, v, DecovidMethod::PostSample)
}

pub fn decovid_panel_with(
    panel: &DMatrix<f64>,
    names: &[String],
    spec: &DecovidSpec,
    v: &[f64],
    method: DecovidMethod,
) -> Result<DecovidResult> {
    let (t_all, n) = panel.shape();
    if names.len() != n {
        return Err(Error::Misaligned(format!("{} names for {n} series", names.len())));
    }
    spec.validate(t_all, v.len())?;
    let design = build_design(spec, v)?;
    let k = match method {
        DecovidMethod::PostSample => design.names.len(),
        DecovidMethod::FullSample => design.names.len() + 1,
    };

    let fits: Vec<Result<(SeriesFit, usize)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let raw: Vec<f64> = panel.column(j).iter().copied().collect();
            let (series, replaced) = if spec.model == ModelId::M1 {
                replace_outliers_with_pre_mean(&raw, spec.t0)?
            } else {
                (raw, 0)
            };
            let fit = match method {
                DecovidMethod::PostSample => decovid_series(&series, &design, spec.t0)?,
                DecovidMethod::FullSample => decovid_series_full_sample(&series, spec, v)?,
            };
            Ok((fit, replaced))
        })
        .collect();

    let t_post = t_all - spec.t0 - 1;
    let mut result = DecovidResult {
        names: names.to_vec(),
        mu0: Vec::with_capacity(n),
        mu1: DMatrix::zeros(t_post, n),
        x: DMatrix::zeros(t_all, n),
        betas: DMatrix::zeros(k, n),
        design,
        outliers_replaced: Vec::with_capacity(n),
    };
    let mut failures = Vec::new();
    for (j, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok((fit, replaced)) => {
                result.mu0.push(fit.mu0);
                result.mu1.set_column(j, &DVector::from_vec(fit.mu1));
                result.x.set_column(j, &DVector::from_vec(fit.x));
                result.betas.set_column(j, &DVector::from_vec(fit.beta));
                result.outliers_replaced.push(replaced);
            }
            Err(e) => failures.push((names[j].clone(), Box::new(e))),
        }
    }
    if failures.is_empty() {
        Ok(result)
    } else {
        Err(Error::PerSeries(failures))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Positive-case growth Jan 2020 .. Dec 2020 as in the monthly table.
    fn v_p() -> Vec<f64> {
        let levels = [
            2.0, 16.0, 196830.0, 876304.0, 718191.0, 831681.0, 1900163.0, 1457252.0, 1192663.0, 1892016.0,
            4475990.0, 6323266.0,
        ];
        crate::covid::growth_rate(&levels, CovidKind::Positive)
    }

    /// 24 pre-outbreak months then Mar..Dec 2020; T0 = 23 (Feb 2020).
    fn aligned() -> (Vec<f64>, usize) {
        let mut v = vec![0.0; 24];
        v.extend_from_slice(&v_p()[2..]);
        (v, 23)
    }

    #[test]
    fn model_ids() {
        assert!(ModelId::from_number(5).is_err());
        assert!(ModelId::from_number(0).is_err());
        assert_eq!(ModelId::from_number(3).unwrap().to_string(), "M3");
    }

    #[test]
    fn q_beyond_history_is_rejected() {
        let v = vec![0.0, 0.0, 1.0, 2.0];
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, 1).with_q(3);
        assert!(build_design(&spec, &v).is_err());
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, 3);
        assert!(build_design(&spec, &v).is_err(), "no post-outbreak rows");
    }

    #[test]
    fn identically_zero_series_passes_through() {
        let (v, t0) = aligned();
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let design = build_design(&spec, &v).unwrap();
        let fit = decovid_series(&vec![0.0; v.len()], &design, t0).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.mu1.iter().all(|&m| m == 0.0));
        assert!(fit.x.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn planted_contemporaneous_coefficient_is_recovered() {
        let (v, t0) = aligned();
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let design = build_design(&spec, &v).unwrap();
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut worst: f64 = 0.0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let series: Vec<f64> = v.iter().map(|&vt| 2.0 * vt + noise.sample(&mut rng)).collect();
            let fit = decovid_series(&series, &design, t0).unwrap();
            worst = worst.max((fit.beta[1] - 2.0).abs());
        }
        assert!(worst < 0.05, "max |beta0 - 2| = {worst}");
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let (v, t0) = aligned();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let series: Vec<f64> = (0..v.len()).map(|_| Normal::new(1.0, 2.0).unwrap().sample(&mut rng)).collect();
        for m in 1..=4 {
            let spec = DecovidSpec::new(ModelId::from_number(m).unwrap(), CovidKind::Positive, t0);
            let design = build_design(&spec, &v).unwrap();
            let fit = decovid_series(&series, &design, t0).unwrap();
            let resid = DVector::from_iterator(design.rows.len(), fit.x[t0 + 1..].iter().copied());
            let g = design.matrix.transpose() * resid;
            assert!(g.amax() < 1e-8, "model {m}: {g}");
            let pre: f64 = fit.x[..=t0].iter().sum();
            assert!(pre.abs() < 1e-10);
        }
    }

    #[test]
    fn model_four_with_zero_v_reduces_to_demeaning() {
        let t0 = 20;
        let v = vec![0.0; 30];
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let series: Vec<f64> = (0..30).map(|t| (t as f64 * 0.7).sin() + 3.0).collect();
        // the v columns are all zero, so the post design is rank deficient;
        // demeaning is what the full-sample variant with the constant does
        let design = build_design(&spec, &v).unwrap();
        assert!(matches!(decovid_series(&series, &design, t0), Err(Error::RankDeficient { .. })));
        let spec0 = spec.with_q(0);
        let mut no_v = build_design(&spec0, &v).unwrap();
        no_v.matrix = no_v.matrix.columns(0, 1).into_owned();
        no_v.names.truncate(1);
        let fit = decovid_series(&series, &no_v, t0).unwrap();
        let pre_mean = series[..=t0].iter().sum::<f64>() / (t0 + 1) as f64;
        let post_mean = series[t0 + 1..].iter().sum::<f64>() / (29 - t0) as f64;
        for t in 0..30 {
            let m = if t <= t0 { pre_mean } else { post_mean };
            assert_abs_diff_eq!(fit.x[t], series[t] - m, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_deficiency_names_the_collinear_column() {
        // constant post-outbreak growth makes v_t a multiple of the constant
        let t0 = 23;
        let v: Vec<f64> = (0..34).map(|t| if t > t0 { 0.4 } else { 0.0 }).collect();
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let design = build_design(&spec, &v).unwrap();
        let series: Vec<f64> = (0..34).map(|t| t as f64).collect();
        match decovid_series(&series, &design, t0) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["v_t".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn panel_with_noise_and_pure_v_columns() {
        let (v, t0) = aligned();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise: Vec<f64> = (0..v.len()).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
        let panel = DMatrix::from_fn(v.len(), 2, |t, j| if j == 0 { noise[t] } else { v[t] });
        let names = vec!["noise".to_string(), "covid".to_string()];
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let res = decovid_panel(&panel, &names, &spec, &v).unwrap();
        let pre_mean = noise[..=t0].iter().sum::<f64>() / (t0 + 1) as f64;
        for t in 0..=t0 {
            assert_abs_diff_eq!(res.x[(t, 0)], noise[t] - pre_mean, epsilon = 1e-12);
        }
        for t in t0 + 1..v.len() {
            assert!(res.x[(t, 1)].abs() < 1e-9);
        }
        assert_eq!(res.mu1.nrows(), v.len() - t0 - 1);
    }

    #[test]
    fn model_one_leaves_april_variation_in_the_residual() {
        let (v, t0) = aligned();
        let spec = DecovidSpec::new(ModelId::M1, CovidKind::Positive, t0);
        let design = build_design(&spec, &v).unwrap();
        // the April row carries only the constant
        let april = design.matrix.row(1);
        assert_eq!(april.iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut series: Vec<f64> = (0..v.len()).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
        series[t0 + 2] -= 6.0;
        let fit = decovid_series(&series, &design, t0).unwrap();
        assert_abs_diff_eq!(fit.mu1[1], fit.beta[0], epsilon = 1e-12);
        assert!(fit.x[t0 + 2] < -3.0, "April shock stays in x: {}", fit.x[t0 + 2]);
    }

    #[test]
    fn model_one_replaces_outliers_by_pre_mean() {
        let (v, t0) = aligned();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut series: Vec<f64> = (0..v.len()).map(|_| Normal::new(5.0, 1.0).unwrap().sample(&mut rng)).collect();
        series[t0 + 1] = 500.0;
        let panel = DMatrix::from_column_slice(v.len(), 1, &series);
        let spec = DecovidSpec::new(ModelId::M1, CovidKind::Positive, t0);
        let res = decovid_panel(&panel, &["s".to_string()], &spec, &v).unwrap();
        assert_eq!(res.outliers_replaced, vec![1]);
        assert!(res.mu1[(0, 0)] < 20.0);
    }

    #[test]
    fn models_two_and_three_agree_without_contemporaneous_effect() {
        let (v, t0) = aligned();
        let series: Vec<f64> = (0..v.len())
            .map(|t| if t > t0 { 0.5 * v[t - 1] - 0.3 * v[t - 2] + 1.0 } else { 0.0 })
            .collect();
        let mut mu = Vec::new();
        for m in [ModelId::M2, ModelId::M3] {
            let spec = DecovidSpec::new(m, CovidKind::Positive, t0);
            let design = build_design(&spec, &v).unwrap();
            mu.push(decovid_series(&series, &design, t0).unwrap().mu1);
        }
        for (a, b) in mu[0].iter().zip(&mu[1]) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn full_sample_variant_matches_post_sample_fit() {
        let (v, t0) = aligned();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let series: Vec<f64> = (0..v.len())
            .map(|t| Normal::new(0.0, 1.0).unwrap().sample(&mut rng) + if t > t0 { 3.0 * v[t] } else { 0.0 })
            .collect();
        for m in 1..=4 {
            let spec = DecovidSpec::new(ModelId::from_number(m).unwrap(), CovidKind::Positive, t0);
            let design = build_design(&spec, &v).unwrap();
            let a = decovid_series(&series, &design, t0).unwrap();
            let b = decovid_series_full_sample(&series, &spec, &v).unwrap();
            assert_abs_diff_eq!(a.mu0, b.mu0, epsilon = 1e-10);
            for (x, y) in a.x.iter().zip(&b.x) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn empty_panel_gives_empty_result() {
        let (v, t0) = aligned();
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let res = decovid_panel(&DMatrix::zeros(v.len(), 0), &[], &spec, &v).unwrap();
        assert_eq!(res.x.ncols(), 0);
        assert!(res.mu0.is_empty());
    }

    #[test]
    fn panel_errors_name_the_series() {
        let (v, t0) = aligned();
        let spec = DecovidSpec::new(ModelId::M4, CovidKind::Positive, t0);
        let mut panel = DMatrix::from_element(v.len(), 2, 1.0);
        for t in t0 + 1..v.len() {
            panel[(t, 1)] = f64::NAN;
        }
        panel[(t0 + 1, 1)] = 2.0;
        let err = decovid_panel(&panel, &["ok".into(), "sparse".into()], &spec, &v).unwrap_err();
        match err {
            Error::PerSeries(list) => {
                assert_eq!(list.len(), 1);
                assert_eq!(list[0].0, "sparse");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
