//! Stochastic-volatility fits to forecast errors and the equal-weighted
//! macro uncertainty index built from them.
//!
//! The SV model is estimated by quasi maximum likelihood on
//! `log(e_t^2 + c) + 1.2704 = mu + a_t + xi_t`, `a_t = rho a_{t-1} + eta_t`,
//! treating `xi_t` as Gaussian with the log chi-square(1) variance `pi^2/2`.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::{forecast_panel, ForecastConfig, PanelForecast, PredictorSet};
use crate::month::Month;

/// Mean of `log chi^2(1)`.
pub const LOG_CHI2_MEAN: f64 = -1.2704;
/// Variance of `log chi^2(1)`.
pub const LOG_CHI2_VAR: f64 = std::f64::consts::PI * std::f64::consts::PI / 2.0;
/// Offset inside the log that guards exactly-zero errors.
pub const LOG_OFFSET: f64 = 1e-8;
pub const MIN_SV_OBS: usize = 100;

#[derive(Debug, Clone)]
pub struct SvFit {
    /// Level of the log variance.
    pub mu: f64,
    pub rho: f64,
    pub sigma_eta: f64,
    /// Smoothed log variance `mu + a_t`; `NaN` outside the span of observed
    /// errors.
    pub log_vol: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: u64,
    pub n_obs: usize,
}

struct Filtered {
    a_pred: Vec<f64>,
    p_pred: Vec<f64>,
    a_filt: Vec<f64>,
    p_filt: Vec<f64>,
    loglik: f64,
}

fn kalman(y: &[f64], mu: f64, rho: f64, q: f64) -> Filtered {
    let n = y.len();
    let mut out = Filtered {
        a_pred: Vec::with_capacity(n),
        p_pred: Vec::with_capacity(n),
        a_filt: Vec::with_capacity(n),
        p_filt: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let mut a = 0.0;
    let mut p = q / (1.0 - rho * rho);
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    for &obs in y {
        out.a_pred.push(a);
        out.p_pred.push(p);
        let (af, pf) = if obs.is_finite() {
            let v = obs - mu - a;
            let f = p + LOG_CHI2_VAR;
            out.loglik -= 0.5 * (ln2pi + f.ln() + v * v / f);
            let k = p / f;
            (a + k * v, p * (1.0 - k))
        } else {
            (a, p)
        };
        out.a_filt.push(af);
        out.p_filt.push(pf);
        a = rho * af;
        p = rho * rho * pf + q;
    }
    out
}

fn smooth(f: &Filtered, rho: f64) -> Vec<f64> {
    let n = f.a_filt.len();
    let mut s = vec![0.0; n];
    if n == 0 {
        return s;
    }
    s[n - 1] = f.a_filt[n - 1];
    for t in (0..n - 1).rev() {
        let j = f.p_filt[t] * rho / f.p_pred[t + 1];
        s[t] = f.a_filt[t] + j * (s[t + 1] - f.a_pred[t + 1]);
    }
    s
}

fn unpack(theta: &[f64]) -> (f64, f64, f64) {
    let rho = theta[1].tanh().clamp(-0.9999, 0.9999);
    let sigma = theta[2].clamp(-12.0, 5.0).exp();
    (theta[0], rho, sigma)
}

struct NegLoglik<'a> {
    y: &'a [f64],
}

impl CostFunction for NegLoglik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let (mu, rho, sigma) = unpack(theta);
        let ll = kalman(self.y, mu, rho, sigma * sigma).loglik;
        Ok(if ll.is_finite() { -ll } else { f64::MAX })
    }
}

fn nelder_mead(y: &[f64], start: Vec<f64>, step: f64) -> Result<(Vec<f64>, f64, bool, u64)> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut p = start.clone();
        p[i] += step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-9)
        .map_err(|e| Error::invalid(format!("optimizer setup: {e}")))?;
    let res = Executor::new(NegLoglik { y }, solver)
        .configure(|s| s.max_iters(2000))
        .run()
        .map_err(|e| Error::invalid(format!("optimizer failed: {e}")))?;
    let state = res.state();
    let best = state.get_best_param().cloned().unwrap_or(start);
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    Ok((best, state.get_best_cost(), converged, state.get_iter()))
}

/// Quasi-ML stochastic-volatility fit of one error series. `NaN` entries are
/// treated as missing.
pub fn fit_sv(errors: &[f64]) -> Result<SvFit> {
    let y: Vec<f64> = errors
        .iter()
        .map(|e| if e.is_finite() { (e * e + LOG_OFFSET).ln() - LOG_CHI2_MEAN } else { f64::NAN })
        .collect();
    let observed: Vec<f64> = y.iter().copied().filter(|v| v.is_finite()).collect();
    if observed.len() < MIN_SV_OBS {
        return Err(Error::insufficient("stochastic volatility fit", MIN_SV_OBS, observed.len()));
    }
    let first = y.iter().position(|v| v.is_finite()).expect("observed");
    let last = y.iter().rposition(|v| v.is_finite()).expect("observed");
    let span = &y[first..=last];

    let m = crate::linalg::mean(&observed);
    let var = crate::linalg::sample_sd(&observed).powi(2);
    let rho0: f64 = 0.5;
    let q0 = (var - LOG_CHI2_VAR).max(0.05) * (1.0 - rho0 * rho0);
    let start = vec![m, rho0.atanh(), 0.5 * q0.ln()];
    let (mut theta, mut cost, mut converged, mut iters) = nelder_mead(span, start, 0.5)?;
    // restart from the optimum to escape premature simplex collapse
    let (t2, c2, conv2, it2) = nelder_mead(span, theta.clone(), 0.1)?;
    if c2 <= cost {
        theta = t2;
        cost = c2;
        converged = conv2;
    }
    iters += it2;

    let (mu, rho, sigma_eta) = unpack(&theta);
    let f = kalman(span, mu, rho, sigma_eta * sigma_eta);
    let alpha = smooth(&f, rho);
    let mut log_vol = vec![f64::NAN; errors.len()];
    for (i, a) in alpha.into_iter().enumerate() {
        log_vol[first + i] = mu + a;
    }
    Ok(SvFit {
        mu,
        rho,
        sigma_eta,
        log_vol,
        loglik: -cost,
        converged,
        iterations: iters,
        n_obs: observed.len(),
    })
}

/// One-step-ahead uncertainty `sqrt(E[exp(h_{t+1}) | h_t])` under the fitted
/// AR(1) log variance, indexed by the forecast origin `t`.
pub fn individual_uncertainty(sv: &SvFit) -> Vec<f64> {
    let s2 = sv.sigma_eta * sv.sigma_eta;
    sv.log_vol
        .iter()
        .map(|&h| (sv.rho * h + sv.mu * (1.0 - sv.rho) + s2 / 2.0).exp().sqrt())
        .collect()
}

#[derive(Debug, Clone)]
pub struct UncertaintyIndex {
    pub label: String,
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    /// Equal-weighted aggregate.
    pub u: Vec<f64>,
    /// `T x N` individual uncertainties.
    pub u_j: DMatrix<f64>,
}

impl UncertaintyIndex {
    /// Aggregate in standard-deviation units over its defined entries.
    pub fn standardized(&self) -> Vec<f64> {
        let obs: Vec<f64> = self.u.iter().copied().filter(|v| v.is_finite()).collect();
        if obs.len() < 2 {
            return vec![f64::NAN; self.u.len()];
        }
        let m = crate::linalg::mean(&obs);
        let s = crate::linalg::sample_sd(&obs);
        self.u.iter().map(|v| (v - m) / s).collect()
    }

    /// Maximal runs of consecutive months with standardized uncertainty above
    /// `threshold`.
    pub fn episodes_above(&self, threshold: f64) -> Vec<(Month, Month)> {
        let z = self.standardized();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (i, v) in z.iter().enumerate() {
            let above = v.is_finite() && *v > threshold;
            match (above, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((self.dates[s], self.dates[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((self.dates[s], *self.dates.last().expect("non-empty")));
        }
        out
    }
}

/// Cross-sectional mean of individual uncertainties; a month where any series
/// is undefined is undefined.
pub fn aggregate_uncertainty(dates: &[Month], names: &[String], u_j: &[Vec<f64>], label: &str) -> Result<UncertaintyIndex> {
    if u_j.is_empty() {
        return Err(Error::Empty("individual uncertainty series".into()));
    }
    if names.len() != u_j.len() {
        return Err(Error::Misaligned(format!("{} names for {} series", names.len(), u_j.len())));
    }
    let t = dates.len();
    if let Some((j, s)) = u_j.iter().enumerate().find(|(_, s)| s.len() != t) {
        return Err(Error::Misaligned(format!("`{}` has {} rows, expected {t}", names[j], s.len())));
    }
    let n = u_j.len() as f64;
    let u = (0..t).map(|i| u_j.iter().map(|s| s[i]).sum::<f64>() / n).collect();
    Ok(UncertaintyIndex {
        label: label.to_string(),
        dates: dates.to_vec(),
        names: names.to_vec(),
        u,
        u_j: DMatrix::from_fn(t, u_j.len(), |i, j| u_j[j][i]),
    })
}

/// `U(X) - U(x)`, month by month.
pub fn covid_uncertainty(u_big: &UncertaintyIndex, u_small: &UncertaintyIndex) -> Result<Vec<f64>> {
    if u_big.dates != u_small.dates {
        return Err(Error::Misaligned(format!(
            "`{}` and `{}` are on different dates",
            u_big.label, u_small.label
        )));
    }
    Ok(u_big.u.iter().zip(&u_small.u).map(|(a, b)| a - b).collect())
}

/// Forecast errors, SV fits and the aggregate index for one panel.
#[derive(Debug, Clone)]
pub struct UncertaintyRun {
    pub forecasts: PanelForecast,
    pub fits: Vec<SvFit>,
    pub index: UncertaintyIndex,
}

/// Forecasts every column of `targets`, fits SV to each error series (in
/// parallel) and aggregates.
pub fn macro_uncertainty(
    targets: &DMatrix<f64>,
    names: &[String],
    dates: &[Month],
    predictors: &PredictorSet,
    cfg: &ForecastConfig,
    label: &str,
) -> Result<UncertaintyRun> {
    if dates.len() != targets.nrows() {
        return Err(Error::Misaligned(format!("{} dates for {} rows", dates.len(), targets.nrows())));
    }
    let forecasts = forecast_panel(targets, names, predictors, cfg)?;
    let fitted: Vec<Result<SvFit>> = forecasts.series.par_iter().map(|r| fit_sv(&r.errors)).collect();
    let mut fits = Vec::with_capacity(fitted.len());
    let mut failures = Vec::new();
    for (r, f) in forecasts.series.iter().zip(fitted) {
        match f {
            Ok(f) => fits.push(f),
            Err(e) => failures.push((r.target.clone(), Box::new(e))),
        }
    }
    if !failures.is_empty() {
        return Err(Error::PerSeries(failures));
    }
    let u_j: Vec<Vec<f64>> = fits.iter().map(individual_uncertainty).collect();
    let index = aggregate_uncertainty(dates, names, &u_j, label)?;
    Ok(UncertaintyRun { forecasts, fits, index })
}
