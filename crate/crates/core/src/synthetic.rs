//! Known-truth data generators: a factor panel with a virus factor that
//! switches on after `T0`, and VARs with an optional COVID injection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{DailyCovidSeries, RawPanel};
use crate::month::Month;
use crate::transform::Tcode;
use crate::var::spectral_radius;

/// Observed COVID growth after the outbreak: fixed opening values, then a
/// mean-zero AR(1).
#[derive(Debug, Clone, PartialEq)]
pub struct VirusPath {
    /// Growth in the first post-outbreak months.
    pub spike: Vec<f64>,
    pub persistence: f64,
    pub sigma_v: f64,
}

impl Default for VirusPath {
    fn default() -> Self {
        VirusPath {
            spike: vec![9.4, 1.5],
            persistence: 0.3,
            sigma_v: 0.4,
        }
    }
}

impl VirusPath {
    /// Growth on `0..t`: zero through `t0`, the path afterwards.
    pub fn generate(&self, t: usize, t0: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut v = vec![0.0; t];
        for (i, s) in (t0 + 1..t).enumerate() {
            v[s] = match self.spike.get(i) {
                Some(&x) => x,
                None => {
                    let z: f64 = StandardNormal.sample(rng);
                    self.persistence * v[s - 1] + self.sigma_v * z
                }
            };
        }
        v
    }
}

/// AR(1) log-variance `h_t = rho h_{t-1} + sigma eta_t` for errors with
/// stochastic volatility. Errors are rescaled so their unconditional
/// variance is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogVolatility {
    pub rho: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct DgpConfig {
    pub n: usize,
    pub t: usize,
    /// Row of the last pre-outbreak month.
    pub t0: usize,
    pub r: usize,
    pub lambda_scale: f64,
    /// Scale of the virus-factor loadings.
    pub gamma_scale: f64,
    /// Share of series with a non-zero virus loading.
    pub gamma_fraction: f64,
    /// AR coefficients shared by every factor.
    pub factor_ar: Vec<f64>,
    /// AR coefficients shared by every idiosyncratic error.
    pub idio_ar: Vec<f64>,
    pub noise_sd: f64,
    /// Stochastic volatility of the idiosyncratic innovations (none when
    /// `None`).
    pub idio_volatility: Option<LogVolatility>,
    /// Persistence of the virus factor: `V_t = rho_v V_{t-1} + v_t` after `T0`.
    pub rho_v: f64,
    pub virus: VirusPath,
    /// Path of a second indicator (deaths); same dynamics, different opening.
    pub virus_secondary: VirusPath,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 100,
            t: 730,
            t0: 720,
            r: 3,
            lambda_scale: 1.0,
            gamma_scale: 5.0,
            gamma_fraction: 0.8,
            factor_ar: vec![0.5],
            idio_ar: vec![0.3],
            noise_sd: 1.0,
            idio_volatility: None,
            rho_v: 0.5,
            virus: VirusPath::default(),
            virus_secondary: VirusPath {
                spike: vec![6.8, 2.5],
                ..VirusPath::default()
            },
            seed: 0,
        }
    }
}

fn check_ar(name: &str, coefs: &[f64]) -> Result<()> {
    if coefs.is_empty() {
        return Ok(());
    }
    let a: Vec<DMatrix<f64>> = coefs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect();
    let rho = spectral_radius(&a);
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("{name} AR polynomial has a root of modulus {:.4} inside the unit circle", 1.0 / rho)));
    }
    Ok(())
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r == 0 || self.r > self.n {
            return Err(Error::invalid(format!("need 0 < r <= N, got r = {}, N = {}", self.r, self.n)));
        }
        if self.t0 >= self.t {
            return Err(Error::invalid(format!("T0 = {} must be below T = {}", self.t0, self.t)));
        }
        if !(0.0..=1.0).contains(&self.gamma_fraction) {
            return Err(Error::invalid("gamma_fraction must lie in [0, 1]"));
        }
        check_ar("factor", &self.factor_ar)?;
        check_ar("idiosyncratic", &self.idio_ar)?;
        if let Some(vol) = self.idio_volatility {
            check_ar("log volatility", &[vol.rho])?;
        }
        check_ar("virus factor", &[self.rho_v])?;
        check_ar("virus growth", &[self.virus.persistence])?;
        check_ar("secondary virus growth", &[self.virus_secondary.persistence])?;
        Ok(())
    }

    /// Calendar months of the simulated sample, with row `t0` at 2020-02.
    pub fn dates(&self) -> Vec<Month> {
        let t0_month = Month::new(2020, 2).expect("valid month");
        (0..self.t).map(|i| t0_month.offset(i as i32 - self.t0 as i32)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    /// `T x N` observed panel.
    pub x: DMatrix<f64>,
    /// `T x r` true factors.
    pub f: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    /// Virus factor, zero through `T0`.
    pub v_factor: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Observed growth of the primary indicator (positives).
    pub v: Vec<f64>,
    /// Observed growth of the secondary indicator (deaths).
    pub v_secondary: Vec<f64>,
    /// `T x N` idiosyncratic errors.
    pub e: DMatrix<f64>,
    pub dates: Vec<Month>,
}

fn ar_path(rng: &mut ChaCha8Rng, coefs: &[f64], sd: f64, t: usize, burn: usize, vol: Option<LogVolatility>) -> Vec<f64> {
    let mut x = vec![0.0; t + burn];
    let mut h = 0.0;
    for s in 0..t + burn {
        let z: f64 = StandardNormal.sample(rng);
        let mut v = sd * z;
        if let Some(LogVolatility { rho, sigma }) = vol {
            let eta: f64 = StandardNormal.sample(rng);
            h = rho * h + sigma * eta;
            let var_h = sigma * sigma / (1.0 - rho * rho);
            v *= ((h - var_h / 2.0) / 2.0).exp();
        }
        for (l, c) in coefs.iter().enumerate() {
            if s > l {
                v += c * x[s - l - 1];
            }
        }
        x[s] = v;
    }
    x.split_off(burn)
}

/// `X = F Lambda' + V Gamma' + e` with independent AR factors and errors.
pub fn simulate_dgp(cfg: &DgpConfig) -> Result<SimulatedPanel> {
    cfg.validate()?;
    let (t, n, r) = (cfg.t, cfg.n, cfg.r);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let burn = 200;
    let mut f = DMatrix::zeros(t, r);
    for k in 0..r {
        f.set_column(k, &DVector::from_vec(ar_path(&mut rng, &cfg.factor_ar, 1.0, t, burn, None)));
    }
    let lambda = DMatrix::from_fn(n, r, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        cfg.lambda_scale * z
    });
    let n_gamma = (cfg.gamma_fraction * n as f64).round() as usize;
    let gamma: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if i < n_gamma { cfg.gamma_scale * z } else { 0.0 }
        })
        .collect();
    let mut e = DMatrix::zeros(t, n);
    for i in 0..n {
        e.set_column(i, &DVector::from_vec(ar_path(&mut rng, &cfg.idio_ar, cfg.noise_sd, t, burn, cfg.idio_volatility)));
    }
    let mut virus_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    virus_rng.set_stream(1);
    let v = cfg.virus.generate(t, cfg.t0, &mut virus_rng);
    let v_secondary = cfg.virus_secondary.generate(t, cfg.t0, &mut virus_rng);
    let mut v_factor = vec![0.0; t];
    for s in cfg.t0 + 1..t {
        v_factor[s] = cfg.rho_v * v_factor[s - 1] + v[s];
    }
    let mut x = &f * lambda.transpose() + &e;
    for s in cfg.t0 + 1..t {
        for i in 0..n {
            x[(s, i)] += gamma[i] * v_factor[s];
        }
    }
    Ok(SimulatedPanel {
        x,
        f,
        lambda,
        v_factor,
        gamma,
        v,
        v_secondary,
        e,
        dates: cfg.dates(),
    })
}

impl SimulatedPanel {
    /// The panel as a FRED-MD style panel of level series (transform code 1).
    pub fn to_raw_panel(&self) -> RawPanel {
        let n = self.x.ncols();
        RawPanel {
            dates: self.dates.clone(),
            names: (1..=n).map(|i| format!("X{i:03}")).collect(),
            tcodes: vec![Tcode::Level; n],
            values: self.x.clone(),
            skipped: vec![],
        }
    }

    /// Daily counts whose monthly sums have log growth `v` (positives) and
    /// `v_secondary` (deaths and hospitalizations) after the outbreak. The
    /// month of the outbreak's predecessor carries a single case so growth is
    /// defined from the first post-outbreak month on.
    pub fn to_daily_covid(&self, t0: usize) -> DailyCovidSeries {
        let levels = |g: &[f64]| -> Vec<f64> {
            let mut out = vec![1.0];
            for &x in &g[t0 + 1..] {
                out.push((out.last().expect("non-empty") * x.exp()).round().max(1.0));
            }
            out
        };
        let p = levels(&self.v);
        let d = levels(&self.v_secondary);
        let mut s = DailyCovidSeries::default();
        for (k, m) in self.dates[t0..].iter().enumerate() {
            let first = m.first_day();
            let days = m.next().first_day().signed_duration_since(first).num_days() as usize;
            let spread = |total: f64, day: usize| -> f64 {
                let base = (total / days as f64).floor();
                let rem = total - base * days as f64;
                base + if day >= days - rem as usize { 1.0 } else { 0.0 }
            };
            for day in 0..days {
                s.dates.push(first + chrono::Days::new(day as u64));
                s.positive_increase.push(spread(p[k], day));
                s.death_increase.push(spread(d[k], day));
                s.hospitalized_increase.push(spread(d[k], day));
            }
        }
        s
    }
}

/// A VAR data generating process `Y_t = c + sum_i A_i Y_{t-i} + B e_t`.
#[derive(Debug, Clone)]
pub struct VarDgp {
    pub names: Vec<String>,
    pub a: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub intercept: DVector<f64>,
}

impl VarDgp {
    /// Unemployment and industrial production growth with hump-shaped
    /// responses to an unemployment shock.
    pub fn unemployment_production() -> Self {
        VarDgp {
            names: vec!["UR".into(), "IP".into()],
            a: vec![
                DMatrix::from_row_slice(2, 2, &[1.55, 0.0, -0.6, 0.3]),
                DMatrix::from_row_slice(2, 2, &[-0.595, 0.0, 0.4, 0.1]),
            ],
            b: DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 1.0]),
            intercept: DVector::zeros(2),
        }
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    /// True responses to one-standard-deviation shocks, horizons `0..=h`.
    pub fn true_irf(&self, h: usize) -> Vec<DMatrix<f64>> {
        let mut psi: Vec<DMatrix<f64>> = vec![self.b.clone()];
        for s in 1..=h {
            let mut m = DMatrix::zeros(self.n(), self.n());
            for (i, ai) in self.a.iter().enumerate().take(s) {
                m += ai * &psi[s - i - 1];
            }
            psi.push(m);
        }
        psi
    }
}

/// Additive COVID term `sum_l loadings[l] * v_{t-l}` added to the simulated
/// data after the recursion.
#[derive(Debug, Clone)]
pub struct Injection {
    pub v: Vec<f64>,
    /// One `n`-vector per lag, starting at lag 0.
    pub loadings: Vec<DVector<f64>>,
}

impl Injection {
    pub fn scaled(&self, amplitude: f64) -> Self {
        Injection {
            v: self.v.clone(),
            loadings: self.loadings.iter().map(|b| b * amplitude).collect(),
        }
    }
}

/// `T x n` draw from the VAR after a burn-in, plus the optional injection.
pub fn simulate_var(dgp: &VarDgp, t: usize, injection: Option<&Injection>, seed: u64) -> Result<DMatrix<f64>> {
    let n = dgp.n();
    if dgp.a.iter().any(|a| a.shape() != (n, n)) || dgp.intercept.len() != n {
        return Err(Error::invalid("VAR coefficient shapes disagree"));
    }
    let rho = spectral_radius(&dgp.a);
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("companion spectral radius {rho:.4}")));
    }
    let p = dgp.a.len();
    let burn = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DMatrix::zeros(t + burn, n);
    for s in 0..t + burn {
        let e = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let mut v = &dgp.intercept + &dgp.b * e;
        for i in 0..p.min(s) {
            v += &dgp.a[i] * y.row(s - i - 1).transpose();
        }
        y.set_row(s, &v.transpose());
    }
    let mut y = y.rows(burn, t).into_owned();
    if let Some(inj) = injection {
        if inj.v.len() != t {
            return Err(Error::Misaligned(format!("injection covers {} rows, simulation has {t}", inj.v.len())));
        }
        for s in 0..t {
            for (l, b) in inj.loadings.iter().enumerate() {
                if s >= l {
                    let add = b * inj.v[s - l];
                    for i in 0..n {
                        y[(s, i)] += add[i];
                    }
                }
            }
        }
    }
    Ok(y)
}
