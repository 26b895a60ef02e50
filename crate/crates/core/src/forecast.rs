//! Diffusion-index forecasting: direct `h`-step regressions of each series on
//! its own lags and on predictors screened one lag column at a time by their
//! t-statistic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::ols_named;

/// Which auxiliary predictors accompany the factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorMode {
    /// `W = (F_m, F_f, F_m1^2, G_m)`.
    PreCovid,
    /// `W+ = (F_m, F_f, F_m1^2, v^P, v^D)`.
    PostCovid,
}

/// Raw ingredients for [`build_predictors`], all on the same date index.
#[derive(Debug, Clone, Copy)]
pub struct PredictorInputs<'a> {
    pub macro_factors: &'a DMatrix<f64>,
    pub financial_factors: Option<&'a DMatrix<f64>>,
    /// First factor of the squared macro panel (needed in pre-covid mode).
    pub g_m: Option<&'a [f64]>,
    pub v_p: Option<&'a [f64]>,
    pub v_d: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct PredictorSet {
    pub mode: PredictorMode,
    pub names: Vec<String>,
    /// `T x K` predictor values.
    pub values: DMatrix<f64>,
    /// Columns that are estimated factors (these get their own forecasting
    /// equations).
    pub factor_columns: Vec<usize>,
}

impl PredictorSet {
    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }
}

pub fn build_predictors(inputs: PredictorInputs<'_>, mode: PredictorMode) -> Result<PredictorSet> {
    let fm = inputs.macro_factors;
    let t = fm.nrows();
    if fm.ncols() == 0 {
        return Err(Error::invalid("at least one macro factor is required"));
    }
    let check = |what: &str, len: usize| -> Result<()> {
        if len != t {
            Err(Error::Misaligned(format!("{what} has {len} rows, macro factors have {t}")))
        } else {
            Ok(())
        }
    };
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut factor_columns = Vec::new();
    for k in 0..fm.ncols() {
        factor_columns.push(cols.len());
        names.push(format!("Fm{}", k + 1));
        cols.push(fm.column(k).iter().copied().collect());
    }
    if let Some(ff) = inputs.financial_factors {
        check("financial factors", ff.nrows())?;
        for k in 0..ff.ncols() {
            factor_columns.push(cols.len());
            names.push(format!("Ff{}", k + 1));
            cols.push(ff.column(k).iter().copied().collect());
        }
    }
    names.push("Fm1_sq".into());
    cols.push(fm.column(0).iter().map(|x| x * x).collect());
    match mode {
        PredictorMode::PreCovid => {
            let g = inputs.g_m.ok_or_else(|| Error::invalid("pre-covid predictors need the squared-panel factor G_m"))?;
            check("G_m", g.len())?;
            names.push("Gm".into());
            cols.push(g.to_vec());
        }
        PredictorMode::PostCovid => {
            let (p, d) = match (inputs.v_p, inputs.v_d) {
                (Some(p), Some(d)) => (p, d),
                _ => return Err(Error::invalid("post-covid predictors need both v^P and v^D")),
            };
            check("v^P", p.len())?;
            check("v^D", d.len())?;
            names.push("vP".into());
            cols.push(p.to_vec());
            names.push("vD".into());
            cols.push(d.to_vec());
        }
    }
    let values = DMatrix::from_fn(t, cols.len(), |i, j| cols[j][i]);
    Ok(PredictorSet {
        mode,
        names,
        values,
        factor_columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastConfig {
    pub h: usize,
    pub p_y: usize,
    pub p_w: usize,
    /// Absolute t-statistic a candidate column must exceed to be kept.
    pub threshold: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            h: 1,
            p_y: 4,
            p_w: 2,
            threshold: 2.56,
        }
    }
}

impl ForecastConfig {
    fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::invalid("forecast horizon must be at least 1"));
        }
        if self.p_y == 0 || self.p_w == 0 {
            return Err(Error::invalid("lag orders must be at least 1"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("screening threshold must be positive"));
        }
        Ok(())
    }
}

/// Keeps candidate column `j` iff its t-statistic in the regression of `y` on
/// `[1, own_lags, candidates_j]` exceeds `threshold` in absolute value.
pub fn screen_predictors(y: &[f64], own_lags: &DMatrix<f64>, candidates: &DMatrix<f64>, threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("screening threshold must be positive"));
    }
    let n = y.len();
    if own_lags.nrows() != n || candidates.nrows() != n {
        return Err(Error::Misaligned("screening inputs differ in length".into()));
    }
    let k = own_lags.ncols() + 2;
    if n <= k {
        return Err(Error::insufficient("predictor screening", k + 1, n));
    }
    if threshold.is_infinite() {
        return Ok(Vec::new());
    }
    // Partial out [1, own lags] once, then each candidate is a one-column
    // regression on the residualized data.
    let mut base = DMatrix::from_element(n, own_lags.ncols() + 1, 1.0);
    base.view_mut((0, 1), (n, own_lags.ncols())).copy_from(own_lags);
    let qr = base.qr();
    let q = qr.q();
    let resid = |v: &DVector<f64>| v - &q * (q.transpose() * v);
    let y_t = resid(&DVector::from_column_slice(y));
    let df = (n - k) as f64;
    let mut keep = Vec::new();
    for j in 0..candidates.ncols() {
        let c = resid(&candidates.column(j).into_owned());
        let cc = c.norm_squared();
        if cc <= 1e-12 * candidates.column(j).norm_squared().max(f64::MIN_POSITIVE) {
            continue;
        }
        let beta = c.dot(&y_t) / cc;
        let rss = (&y_t - &c * beta).norm_squared();
        let t = beta / (rss / df / cc).sqrt();
        if t.abs() > threshold {
            keep.push(j);
        }
    }
    Ok(keep)
}

/// One series' forecasting equation.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub target: String,
    /// Predictor lag columns that survived screening, e.g. `Fm1_L0`.
    pub selected: Vec<String>,
    /// Regressors of the final equation: `const`, own lags, selected columns.
    pub regressor_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub t_stats: Vec<f64>,
    /// Fitted values indexed by target date (`NaN` where undefined).
    pub fitted: Vec<f64>,
    /// `h`-step errors indexed by target date (`NaN` where undefined).
    pub errors: Vec<f64>,
}

struct LagData {
    origins: Vec<usize>,
    target: Vec<f64>,
    own: DMatrix<f64>,
    own_names: Vec<String>,
    cand: DMatrix<f64>,
    cand_names: Vec<String>,
}

fn lag_data(y: &[f64], w: &DMatrix<f64>, w_names: &[String], exclude: Option<usize>, cfg: &ForecastConfig) -> LagData {
    let t_all = y.len();
    let start = cfg.p_y.max(cfg.p_w) - 1;
    let cols: Vec<usize> = (0..w.ncols()).filter(|&j| Some(j) != exclude).collect();
    let mut origins = Vec::new();
    for t in start..t_all.saturating_sub(cfg.h) {
        let ok = y[t + cfg.h].is_finite()
            && (0..cfg.p_y).all(|l| y[t - l].is_finite())
            && cols.iter().all(|&j| (0..cfg.p_w).all(|l| w[(t - l, j)].is_finite()));
        if ok {
            origins.push(t);
        }
    }
    let n = origins.len();
    let target = origins.iter().map(|&t| y[t + cfg.h]).collect();
    let own = DMatrix::from_fn(n, cfg.p_y, |i, l| y[origins[i] - l]);
    let own_names = (0..cfg.p_y).map(|l| format!("y_L{l}")).collect();
    let mut cand_names = Vec::new();
    let mut cand = DMatrix::zeros(n, cols.len() * cfg.p_w);
    for (c, &j) in cols.iter().enumerate() {
        for l in 0..cfg.p_w {
            let col = c * cfg.p_w + l;
            cand_names.push(format!("{}_L{l}", w_names[j]));
            for (i, &t) in origins.iter().enumerate() {
                cand[(i, col)] = w[(t - l, j)];
            }
        }
    }
    LagData {
        origins,
        target,
        own,
        own_names,
        cand,
        cand_names,
    }
}

fn forecast_equation(
    y: &[f64],
    target_name: &str,
    predictors: &PredictorSet,
    exclude: Option<usize>,
    cfg: &ForecastConfig,
) -> Result<ForecastResult> {
    cfg.validate()?;
    if y.len() != predictors.n_obs() {
        return Err(Error::Misaligned(format!(
            "`{target_name}` has {} rows, predictors have {}",
            y.len(),
            predictors.n_obs()
        )));
    }
    let d = lag_data(y, &predictors.values, &predictors.names, exclude, cfg);
    let keep = screen_predictors(&d.target, &d.own, &d.cand, cfg.threshold)?;
    let n = d.origins.len();
    let k = 1 + cfg.p_y + keep.len();
    let mut x = DMatrix::from_element(n, k, 1.0);
    x.view_mut((0, 1), (n, cfg.p_y)).copy_from(&d.own);
    for (c, &j) in keep.iter().enumerate() {
        x.set_column(1 + cfg.p_y + c, &d.cand.column(j));
    }
    let selected: Vec<String> = keep.iter().map(|&j| d.cand_names[j].clone()).collect();
    let mut regressor_names = vec!["const".to_string()];
    regressor_names.extend(d.own_names.iter().cloned());
    regressor_names.extend(selected.iter().cloned());
    let fit = ols_named(&x, &DVector::from_vec(d.target), Some(&regressor_names)).map_err(|e| match e {
        Error::InsufficientData { required, actual, .. } => {
            Error::insufficient(format!("forecasting `{target_name}`"), required, actual)
        }
        other => other,
    })?;
    let mut fitted = vec![f64::NAN; y.len()];
    let mut errors = vec![f64::NAN; y.len()];
    for (i, &t) in d.origins.iter().enumerate() {
        fitted[t + cfg.h] = fit.fitted[i];
        errors[t + cfg.h] = fit.residuals[i];
    }
    Ok(ForecastResult {
        target: target_name.to_string(),
        selected,
        regressor_names,
        coefficients: fit.coefficients.iter().copied().collect(),
        t_stats: fit.t_stats.iter().copied().collect(),
        fitted,
        errors,
    })
}

/// Direct `h`-step regression of `y` on its own lags and screened predictor
/// lag columns. Errors are in-sample residuals placed at their target dates.
pub fn diffusion_forecast(y: &[f64], name: &str, predictors: &PredictorSet, cfg: &ForecastConfig) -> Result<ForecastResult> {
    forecast_equation(y, name, predictors, None, cfg)
}

/// Forecasting equations for every target series and every factor.
#[derive(Debug, Clone)]
pub struct PanelForecast {
    pub series: Vec<ForecastResult>,
    pub factor_equations: Vec<ForecastResult>,
}

impl PanelForecast {
    /// `T x N` matrix of the series' errors.
    pub fn error_matrix(&self) -> DMatrix<f64> {
        let t = self.series.first().map_or(0, |r| r.errors.len());
        DMatrix::from_fn(t, self.series.len(), |i, j| self.series[j].errors[i])
    }
}

/// Runs [`diffusion_forecast`] for every column of `targets` and an analogous
/// equation for every factor in `predictors` (its own column is not a
/// candidate). Series are processed in parallel.
pub fn forecast_panel(targets: &DMatrix<f64>, names: &[String], predictors: &PredictorSet, cfg: &ForecastConfig) -> Result<PanelForecast> {
    if names.len() != targets.ncols() {
        return Err(Error::Misaligned(format!("{} names for {} series", names.len(), targets.ncols())));
    }
    let run = |items: Vec<(String, Vec<f64>, Option<usize>)>| -> Result<Vec<ForecastResult>> {
        let out: Vec<(String, Result<ForecastResult>)> = items
            .into_par_iter()
            .map(|(name, y, exclude)| {
                let r = forecast_equation(&y, &name, predictors, exclude, cfg);
                (name, r)
            })
            .collect();
        let mut ok = Vec::with_capacity(out.len());
        let mut failures = Vec::new();
        for (name, r) in out {
            match r {
                Ok(r) => ok.push(r),
                Err(e) => failures.push((name, Box::new(e))),
            }
        }
        if failures.is_empty() {
            Ok(ok)
        } else {
            Err(Error::PerSeries(failures))
        }
    };
    let series = run(
        (0..targets.ncols())
            .map(|j| (names[j].clone(), targets.column(j).iter().copied().collect(), None))
            .collect(),
    )?;
    let factor_equations = run(
        predictors
            .factor_columns
            .iter()
            .map(|&j| (predictors.names[j].clone(), predictors.values.column(j).iter().copied().collect(), Some(j)))
            .collect(),
    )?;
    Ok(PanelForecast { series, factor_equations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(rng: &mut ChaCha8Rng, t: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(t, k, |_, _| StandardNormal.sample(rng))
    }

    fn ar1(rng: &mut ChaCha8Rng, t: usize, phi: f64) -> Vec<f64> {
        let mut y = vec![0.0; t];
        let mut prev = 0.0;
        for _ in 0..100 {
            let e: f64 = StandardNormal.sample(rng);
            prev = phi * prev + e;
        }
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            prev = phi * prev + e;
            *v = prev;
        }
        y
    }

    fn set_of(w: DMatrix<f64>) -> PredictorSet {
        let names = (0..w.ncols()).map(|j| format!("w{j}")).collect();
        PredictorSet {
            mode: PredictorMode::PostCovid,
            names,
            factor_columns: vec![],
            values: w,
        }
    }

    #[test]
    fn predictor_counts_by_mode() {
        let fm = DMatrix::from_element(30, 8, 0.5);
        let ff = DMatrix::from_element(30, 4, 0.1);
        let g = vec![0.0; 30];
        let v = vec![0.0; 30];
        let pre = build_predictors(
            PredictorInputs {
                macro_factors: &fm,
                financial_factors: Some(&ff),
                g_m: Some(&g),
                v_p: None,
                v_d: None,
            },
            PredictorMode::PreCovid,
        )
        .unwrap();
        assert_eq!(pre.names.len(), 14);
        assert!(pre.names.contains(&"Gm".to_string()) && !pre.names.contains(&"vP".to_string()));
        let post = build_predictors(
            PredictorInputs {
                macro_factors: &fm,
                financial_factors: Some(&ff),
                g_m: Some(&g),
                v_p: Some(&v),
                v_d: Some(&v),
            },
            PredictorMode::PostCovid,
        )
        .unwrap();
        assert_eq!(post.names.len(), 15);
        assert!(!post.names.contains(&"Gm".to_string()));
        assert_eq!(post.factor_columns.len(), 12);
        let no_fin = build_predictors(
            PredictorInputs {
                macro_factors: &fm,
                financial_factors: None,
                g_m: Some(&g),
                v_p: None,
                v_d: None,
            },
            PredictorMode::PreCovid,
        )
        .unwrap();
        assert_eq!(no_fin.names.len(), 10);
        let short = vec![0.0; 29];
        let bad = build_predictors(
            PredictorInputs {
                macro_factors: &fm,
                financial_factors: None,
                g_m: Some(&short),
                v_p: None,
                v_d: None,
            },
            PredictorMode::PreCovid,
        );
        assert!(matches!(bad, Err(Error::Misaligned(_))));
    }

    #[test]
    fn infinite_threshold_is_pure_ar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = ar1(&mut rng, 200, 0.5);
        let set = set_of(noise(&mut rng, 200, 3));
        let cfg = ForecastConfig {
            threshold: f64::INFINITY,
            ..ForecastConfig::default()
        };
        let r = diffusion_forecast(&y, "y", &set, &cfg).unwrap();
        assert!(r.selected.is_empty());
        assert_eq!(r.regressor_names.len(), 1 + cfg.p_y);
    }

    #[test]
    fn ar1_coefficient_and_error_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = ar1(&mut rng, 700, 0.5);
        let set = set_of(noise(&mut rng, 700, 2));
        let cfg = ForecastConfig {
            p_y: 1,
            p_w: 1,
            ..ForecastConfig::default()
        };
        let r = diffusion_forecast(&y, "y", &set, &cfg).unwrap();
        assert_abs_diff_eq!(r.coefficients[1], 0.5, epsilon = 0.05);
        let e: Vec<f64> = r.errors.iter().copied().filter(|v| v.is_finite()).collect();
        let var = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.15);
    }

    #[test]
    fn exact_lagged_factor_gives_near_zero_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = noise(&mut rng, 300, 3);
        let mut y = vec![0.0; 300];
        for t in 1..300 {
            y[t] = w[(t - 1, 0)];
        }
        let set = set_of(w);
        let r = diffusion_forecast(&y, "y", &set, &ForecastConfig::default()).unwrap();
        assert!(r.selected.contains(&"w0_L0".to_string()));
        assert!(r.errors.iter().filter(|v| v.is_finite()).all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn null_mse_ratio_against_mean_forecast() {
        let mut ratios = Vec::new();
        for rep in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let y: Vec<f64> = (0..700).map(|_| StandardNormal.sample(&mut rng)).collect();
            let set = set_of(noise(&mut rng, 700, 3));
            let r = diffusion_forecast(&y, "y", &set, &ForecastConfig::default()).unwrap();
            let pairs: Vec<(f64, f64)> = r
                .errors
                .iter()
                .zip(&y)
                .filter(|(e, _)| e.is_finite())
                .map(|(e, y)| (*e, *y))
                .collect();
            let m = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
            let mse = pairs.iter().map(|p| p.0 * p.0).sum::<f64>();
            let naive = pairs.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>();
            ratios.push(mse / naive);
        }
        let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert_abs_diff_eq!(avg, 1.0, epsilon = 0.05);
    }

    #[test]
    fn residuals_are_orthogonal_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = noise(&mut rng, 400, 2);
        let mut y = ar1(&mut rng, 400, 0.3);
        for t in 1..400 {
            y[t] += 0.8 * w[(t - 1, 1)];
        }
        let set = set_of(w.clone());
        let cfg = ForecastConfig::default();
        let r = diffusion_forecast(&y, "y", &set, &cfg).unwrap();
        assert!(r.selected.contains(&"w1_L0".to_string()));
        let idx: Vec<usize> = (0..400).filter(|&t| r.errors[t].is_finite()).collect();
        let mean = idx.iter().map(|&t| r.errors[t]).sum::<f64>() / idx.len() as f64;
        assert!(mean.abs() < 1e-10);
        let dot: f64 = idx.iter().map(|&t| r.errors[t] * w[(t - 1, 1)]).sum();
        assert!(dot.abs() < 1e-8);
        let dot_own: f64 = idx.iter().map(|&t| r.errors[t] * y[t - 1]).sum();
        assert!(dot_own.abs() < 1e-8);
    }

    #[test]
    fn affine_rescaling_of_a_candidate_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = noise(&mut rng, 300, 3);
        let mut y = ar1(&mut rng, 300, 0.2);
        for t in 1..300 {
            y[t] += 0.5 * w[(t - 1, 2)];
        }
        let a = diffusion_forecast(&y, "y", &set_of(w.clone()), &ForecastConfig::default()).unwrap();
        let mut w2 = w;
        w2.column_mut(2).apply(|v| *v = -3.0 * *v + 7.0);
        let b = diffusion_forecast(&y, "y", &set_of(w2), &ForecastConfig::default()).unwrap();
        assert_eq!(a.selected, b.selected);
        for (x, y) in a.fitted.iter().zip(&b.fitted) {
            assert!((x.is_nan() && y.is_nan()) || (x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_observations_is_an_error() {
        let set = set_of(DMatrix::from_element(6, 2, 1.0));
        let y = vec![1.0, 2.0, 0.5, 3.0, 1.0, 2.0];
        assert!(matches!(
            diffusion_forecast(&y, "y", &set, &ForecastConfig::default()),
            Err(Error::InsufficientData { .. })
        ));
        assert!(screen_predictors(&y, &DMatrix::zeros(6, 1), &DMatrix::zeros(6, 1), 0.0).is_err());
    }

    #[test]
    fn panel_forecast_names_failing_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = noise(&mut rng, 120, 2);
        let mut set = set_of(w);
        set.factor_columns = vec![0, 1];
        let mut targets = noise(&mut rng, 120, 2);
        for t in 0..120 {
            targets[(t, 1)] = f64::NAN;
        }
        let err = forecast_panel(&targets, &["a".into(), "b".into()], &set, &ForecastConfig::default()).unwrap_err();
        match err {
            Error::PerSeries(f) => assert_eq!(f[0].0, "b"),
            other => panic!("unexpected {other}"),
        }
        targets.column_mut(1).fill(0.3);
        targets[(5, 1)] = 1.0;
        let ok = forecast_panel(&targets, &["a".into(), "b".into()], &set, &ForecastConfig::default()).unwrap();
        assert_eq!(ok.factor_equations.len(), 2);
        assert!(ok.factor_equations[0].selected.iter().all(|s| !s.starts_with("w0_")));
    }
}
