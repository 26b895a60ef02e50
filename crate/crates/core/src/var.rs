//! Vector autoregressions with optional exogenous COVID blocks, recursive
//! (Cholesky) identification, impulse responses with residual-bootstrap
//! bands, and orthogonalized shocks.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decovid::DecovidSpec;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, ols_multi, pearson};
use crate::transform::quantile_sorted;

/// Exogenous regressors on the full sample (zeros before the outbreak).
#[derive(Debug, Clone)]
pub struct ExogBlock {
    pub names: Vec<String>,
    /// `T x m`.
    pub values: DMatrix<f64>,
    pub warnings: Vec<String>,
}

impl ExogBlock {
    pub fn empty(t: usize) -> Self {
        ExogBlock {
            names: vec![],
            values: DMatrix::zeros(t, 0),
            warnings: vec![],
        }
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }
}

/// `[D_t (models 1-3), 1{t > T0}, v terms per model]` on every row of the
/// sample. A sample without post-outbreak rows yields an empty block.
pub fn build_exog(spec: &DecovidSpec, v: &[f64]) -> Result<ExogBlock> {
    let t_all = v.len();
    if spec.t0 + 1 >= t_all {
        let mut b = ExogBlock::empty(t_all);
        b.warnings
            .push("sample has no post-outbreak rows; exogenous block is all zero and dropped".into());
        return Ok(b);
    }
    spec.validate(t_all, t_all)?;
    let covid_names = spec.covid_regressor_names();
    let has_d = spec.model.has_outbreak_dummy();
    let mut names = Vec::with_capacity(covid_names.len() + 1);
    if has_d {
        names.push(covid_names[0].clone());
    }
    names.push("post".to_string());
    names.extend(covid_names.iter().skip(usize::from(has_d)).cloned());
    let m = names.len();
    let mut values = DMatrix::zeros(t_all, m);
    for t in 0..t_all {
        let regs = spec.covid_regressors_at(v, t);
        let mut col = 0;
        let mut it = regs.into_iter();
        if has_d {
            values[(t, col)] = it.next().expect("dummy");
            col += 1;
        }
        values[(t, col)] = f64::from(u8::from(t > spec.t0));
        col += 1;
        for x in it {
            values[(t, col)] = x;
            col += 1;
        }
    }
    Ok(ExogBlock {
        names,
        values,
        warnings: vec![],
    })
}

#[derive(Debug, Clone)]
pub struct VarModel {
    pub names: Vec<String>,
    pub p: usize,
    /// `A_1 .. A_p`, each `n x n`.
    pub a: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    pub exog_names: Vec<String>,
    /// `n x m` exogenous coefficients.
    pub exog_coef: DMatrix<f64>,
    /// Residuals on the estimation rows (`rows.len() x n`).
    pub residuals: DMatrix<f64>,
    /// Sample rows of the dependent variable used in estimation.
    pub rows: Range<usize>,
    pub sigma: DMatrix<f64>,
    /// Lower-triangular factor with `B B' = Sigma`.
    pub b: DMatrix<f64>,
    pub warnings: Vec<String>,
    y: DMatrix<f64>,
    exog: DMatrix<f64>,
}

impl VarModel {
    pub fn n(&self) -> usize {
        self.names.len()
    }

    /// Number of regressors per equation.
    pub fn k(&self) -> usize {
        1 + self.n() * self.p + self.exog_names.len()
    }

    /// Exogenous columns actually used (all-zero columns are dropped).
    pub fn exog_values(&self) -> &DMatrix<f64> {
        &self.exog
    }
}

/// Lower factor of a positive semidefinite matrix; pivots at or below
/// round-off give zero columns.
fn semidefinite_cholesky(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let scale = (0..n).map(|i| s[(i, i)].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-13;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let d = s[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let v = s[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = v / ljj;
        }
    }
    l
}

/// Unique lower-triangular `B` with positive diagonal and `B B' = Sigma`.
pub fn cholesky_identify(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cholesky_lower(sigma)
}

fn lag_regressors(y: &DMatrix<f64>, p: usize, rows: &Range<usize>) -> DMatrix<f64> {
    let n = y.ncols();
    DMatrix::from_fn(rows.len(), n * p, |i, c| {
        let lag = c / n + 1;
        y[(rows.start + i - lag, c % n)]
    })
}

struct Prepared {
    rows: Range<usize>,
    exog: DMatrix<f64>,
    exog_names: Vec<String>,
    warnings: Vec<String>,
}

fn prepare(y: &DMatrix<f64>, names: &[String], p: usize, exog: Option<&ExogBlock>, rows: Range<usize>) -> Result<Prepared> {
    let (t_all, n) = y.shape();
    if n == 0 {
        return Err(Error::Empty("VAR variables".into()));
    }
    if names.len() != n {
        return Err(Error::Misaligned(format!("{} names for {n} variables", names.len())));
    }
    if p == 0 {
        return Err(Error::invalid("VAR lag order must be at least 1"));
    }
    if rows.start < p || rows.end > t_all || rows.is_empty() {
        return Err(Error::invalid(format!(
            "estimation rows {rows:?} need {p} presample rows inside a sample of {t_all}"
        )));
    }
    if y.rows(rows.start - p, rows.len() + p).iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("VAR data contain missing values"));
    }
    let mut warnings = Vec::new();
    let (mut exog_names, mut cols) = (Vec::new(), Vec::new());
    if let Some(block) = exog {
        if block.n_obs() != t_all {
            return Err(Error::Misaligned(format!(
                "exogenous block has {} rows, data have {t_all}",
                block.n_obs()
            )));
        }
        warnings.extend(block.warnings.iter().cloned());
        for (j, name) in block.names.iter().enumerate() {
            let col = block.values.column(j);
            if rows.clone().all(|t| col[t] == 0.0) {
                warnings.push(format!("exogenous column `{name}` is zero on the estimation rows; dropped"));
            } else {
                exog_names.push(name.clone());
                cols.push(j);
            }
        }
    }
    let exog_m = match exog {
        Some(block) => DMatrix::from_fn(t_all, cols.len(), |t, c| block.values[(t, cols[c])]),
        None => DMatrix::zeros(t_all, 0),
    };
    let k = 1 + n * p + cols.len();
    if rows.len() <= k {
        return Err(Error::insufficient("VAR estimation", k + 1, rows.len()));
    }
    Ok(Prepared {
        rows,
        exog: exog_m,
        exog_names,
        warnings,
    })
}

fn finish(
    y: &DMatrix<f64>,
    names: &[String],
    p: usize,
    prep: Prepared,
    intercept: DVector<f64>,
    a: Vec<DMatrix<f64>>,
    exog_coef: DMatrix<f64>,
    residuals: DMatrix<f64>,
) -> VarModel {
    let n = y.ncols();
    let k = 1 + n * p + prep.exog_names.len();
    let dof = (prep.rows.len() - k) as f64;
    let sigma = residuals.transpose() * &residuals / dof;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let b = semidefinite_cholesky(&sigma);
    VarModel {
        names: names.to_vec(),
        p,
        a,
        intercept,
        exog_names: prep.exog_names,
        exog_coef,
        residuals,
        rows: prep.rows,
        sigma,
        b,
        warnings: prep.warnings,
        y: y.clone(),
        exog: prep.exog,
    }
}

fn unpack_lags(coef_rows: &DMatrix<f64>, n: usize, p: usize) -> Vec<DMatrix<f64>> {
    (0..p)
        .map(|i| coef_rows.rows(i * n, n).transpose())
        .collect()
}

/// Equation-by-equation least squares of `Y_t` on `[1, Y_{t-1}, .., Y_{t-p}, exog_t]`
/// over rows `p..T`.
pub fn estimate_var(y: &DMatrix<f64>, names: &[String], p: usize, exog: Option<&ExogBlock>) -> Result<VarModel> {
    estimate_var_on(y, names, p, exog, p..y.nrows())
}

/// As [`estimate_var`] on the given dependent-variable rows; lags may reach
/// back before `rows.start`.
pub fn estimate_var_on(
    y: &DMatrix<f64>,
    names: &[String],
    p: usize,
    exog: Option<&ExogBlock>,
    rows: Range<usize>,
) -> Result<VarModel> {
    let prep = prepare(y, names, p, exog, rows)?;
    let n = y.ncols();
    let t_eff = prep.rows.len();
    let m = prep.exog_names.len();
    let mut x = DMatrix::from_element(t_eff, 1 + n * p + m, 1.0);
    x.view_mut((0, 1), (t_eff, n * p)).copy_from(&lag_regressors(y, p, &prep.rows));
    x.view_mut((0, 1 + n * p), (t_eff, m)).copy_from(&prep.exog.rows(prep.rows.start, t_eff));
    let yy = y.rows(prep.rows.start, t_eff).into_owned();
    let (coef, resid) = ols_multi(&x, &yy)?;
    let intercept = coef.row(0).transpose();
    let a = unpack_lags(&coef.rows(1, n * p).into_owned(), n, p);
    let exog_coef = coef.rows(1 + n * p, m).transpose();
    Ok(finish(y, names, p, prep, intercept, a, exog_coef, resid))
}

fn purge(m: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    m - q * (q.transpose() * m)
}

/// Same estimates as [`estimate_var`], computed by first purging the
/// dependent variables and every lag column of `[1, exog]` on the estimation
/// rows and then running a VAR without deterministic terms on the purged data.
pub fn estimate_var_prepurged(y: &DMatrix<f64>, names: &[String], p: usize, exog: Option<&ExogBlock>) -> Result<VarModel> {
    let prep = prepare(y, names, p, exog, p..y.nrows())?;
    let n = y.ncols();
    let t_eff = prep.rows.len();
    let m = prep.exog_names.len();
    let mut d = DMatrix::from_element(t_eff, 1 + m, 1.0);
    d.view_mut((0, 1), (t_eff, m)).copy_from(&prep.exog.rows(prep.rows.start, t_eff));
    if !crate::linalg::collinear_columns(&d).is_empty() {
        return Err(Error::RankDeficient {
            columns: crate::linalg::collinear_columns(&d)
                .into_iter()
                .map(|j| if j == 0 { "const".to_string() } else { prep.exog_names[j - 1].clone() })
                .collect(),
        });
    }
    let q = d.clone().qr().q();
    let yy = y.rows(prep.rows.start, t_eff).into_owned();
    let z = lag_regressors(y, p, &prep.rows);
    let y_tilde = purge(&yy, &q);
    let z_tilde = purge(&z, &q);
    let (a_coef, resid) = ols_multi(&z_tilde, &y_tilde)?;
    let a = unpack_lags(&a_coef, n, p);
    // deterministic coefficients from the part of Y the lags leave unexplained
    let (det, _) = ols_multi(&d, &(&yy - &z * &a_coef))?;
    let intercept = det.row(0).transpose();
    let exog_coef = det.rows(1, m).transpose();
    Ok(finish(y, names, p, prep, intercept, a, exog_coef, resid))
}

/// `np x np` companion matrix of `A_1 .. A_p`.
pub fn companion(a: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = a.len();
    let n = a.first().map_or(0, |m| m.nrows());
    let mut c = DMatrix::zeros(n * p, n * p);
    for (i, ai) in a.iter().enumerate() {
        c.view_mut((0, i * n), (n, n)).copy_from(ai);
    }
    for i in 1..p {
        c.view_mut((i * n, (i - 1) * n), (n, n)).fill_with_identity();
    }
    c
}

/// Largest eigenvalue modulus of the companion matrix.
pub fn spectral_radius(a: &[DMatrix<f64>]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    companion(a)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct IrfBands {
    pub level: f64,
    pub lower: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    pub reps: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct IrfResult {
    /// `responses[h][(i, k)]`: response of variable `i` to shock `k` at horizon `h`.
    pub responses: Vec<DMatrix<f64>>,
    pub bands: Option<IrfBands>,
}

impl IrfResult {
    pub fn horizon(&self) -> usize {
        self.responses.len() - 1
    }

    /// Path of variable `i` after shock `k`.
    pub fn path(&self, i: usize, k: usize) -> Vec<f64> {
        self.responses.iter().map(|m| m[(i, k)]).collect()
    }
}

fn irf_matrices(a: &[DMatrix<f64>], b: &DMatrix<f64>, h: usize) -> Vec<DMatrix<f64>> {
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(h + 1);
    psi.push(b.clone());
    for s in 1..=h {
        let mut m = DMatrix::zeros(b.nrows(), b.ncols());
        for (i, ai) in a.iter().enumerate().take(s) {
            m += ai * &psi[s - i - 1];
        }
        psi.push(m);
    }
    psi
}

/// Responses to one-standard-deviation orthogonalized shocks, horizons `0..=h`,
/// with exogenous terms held fixed.
pub fn irf(model: &VarModel, h: usize) -> IrfResult {
    IrfResult {
        responses: irf_matrices(&model.a, &model.b, h),
        bands: None,
    }
}

/// Recursive-design residual bootstrap: resample centered residuals with
/// replacement, rebuild `Y` from the estimated system with the exogenous
/// block held fixed, re-estimate and recompute responses. Percentile bands,
/// widened where needed so they contain the point estimate. Replication `r`
/// draws from stream `r` of a generator seeded with `seed`, so results do
/// not depend on the number of worker threads.
pub fn bootstrap_ci(model: &VarModel, h: usize, reps: usize, level: f64, seed: u64) -> Result<IrfResult> {
    if reps < 200 {
        return Err(Error::invalid(format!("bootstrap needs at least 200 replications, got {reps}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    let point = irf(model, h);
    let n = model.n();
    let t_eff = model.rows.len();
    let mean_u = model.residuals.row_mean();
    let centered = DMatrix::from_fn(t_eff, n, |i, j| model.residuals[(i, j)] - mean_u[j]);
    let exog_block = ExogBlock {
        names: model.exog_names.clone(),
        values: model.exog.clone(),
        warnings: vec![],
    };
    let use_exog = !model.exog_names.is_empty();

    let draws: Vec<Option<Vec<DMatrix<f64>>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut ys = model.y.rows(0, model.rows.end).into_owned();
            for t in model.rows.clone() {
                let draw = rng.gen_range(0..t_eff);
                let mut yt = model.intercept.clone();
                for (i, ai) in model.a.iter().enumerate() {
                    yt += ai * ys.row(t - i - 1).transpose();
                }
                if use_exog {
                    yt += &model.exog_coef * model.exog.row(t).transpose();
                }
                yt += centered.row(draw).transpose();
                ys.set_row(t, &yt.transpose());
            }
            let exog = use_exog.then(|| ExogBlock {
                values: exog_block.values.rows(0, model.rows.end).into_owned(),
                ..exog_block.clone()
            });
            estimate_var_on(&ys, &model.names, model.p, exog.as_ref(), model.rows.clone())
                .ok()
                .map(|m| irf(&m, h).responses)
        })
        .collect();

    let ok: Vec<&Vec<DMatrix<f64>>> = draws.iter().flatten().collect();
    let failed = reps - ok.len();
    if failed as f64 > 0.05 * reps as f64 {
        return Err(Error::BootstrapFailure { failed, reps });
    }
    let lo_p = (1.0 - level) / 2.0;
    let hi_p = 1.0 - lo_p;
    let mut lower = Vec::with_capacity(h + 1);
    let mut upper = Vec::with_capacity(h + 1);
    for s in 0..=h {
        let mut lo = DMatrix::zeros(n, n);
        let mut hi = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                let mut vals: Vec<f64> = ok.iter().map(|d| d[s][(i, k)]).collect();
                vals.sort_by(f64::total_cmp);
                let pt = point.responses[s][(i, k)];
                lo[(i, k)] = quantile_sorted(&vals, lo_p).min(pt);
                hi[(i, k)] = quantile_sorted(&vals, hi_p).max(pt);
            }
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok(IrfResult {
        responses: point.responses,
        bands: Some(IrfBands {
            level,
            lower,
            upper,
            reps,
            failed,
        }),
    })
}

/// `e_t = B^{-1} u_t` on the estimation rows (`rows.len() x n`).
pub fn orthogonalized_shocks(model: &VarModel) -> Result<DMatrix<f64>> {
    if (0..model.n()).any(|i| !(model.b[(i, i)] > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let e = model
        .b
        .solve_lower_triangular(&model.residuals.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(e.transpose())
}

/// Correlation of two shock columns over the sample rows in `window` that
/// both models cover.
pub fn shock_correlation(
    a: &DMatrix<f64>,
    a_rows: &Range<usize>,
    b: &DMatrix<f64>,
    b_rows: &Range<usize>,
    column: usize,
    window: Range<usize>,
) -> Result<f64> {
    let start = window.start.max(a_rows.start).max(b_rows.start);
    let end = window.end.min(a_rows.end).min(b_rows.end);
    if end <= start + 1 {
        return Err(Error::Empty("shock overlap".into()));
    }
    let xa: Vec<f64> = (start..end).map(|t| a[(t - a_rows.start, column)]).collect();
    let xb: Vec<f64> = (start..end).map(|t| b[(t - b_rows.start, column)]).collect();
    Ok(pearson(&xa, &xb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covid::CovidKind;
    use crate::decovid::ModelId;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("y{i}")).collect()
    }

    fn simulate(a: &[DMatrix<f64>], b: &DMatrix<f64>, t: usize, seed: u64) -> DMatrix<f64> {
        let n = b.nrows();
        let p = a.len();
        let burn = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = DMatrix::zeros(t + burn, n);
        for s in p..t + burn {
            let e = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let mut v = b * e;
            for (i, ai) in a.iter().enumerate() {
                v += ai * y.row(s - i - 1).transpose();
            }
            y.set_row(s, &v.transpose());
        }
        y.rows(burn, t).into_owned()
    }

    fn bivariate() -> Vec<DMatrix<f64>> {
        vec![
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]),
            DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.1]),
        ]
    }

    #[test]
    fn exog_columns_per_model() {
        let mut v = vec![0.0; 30];
        v[26] = 9.0;
        v[27] = 1.5;
        v[28] = 0.3;
        v[29] = 0.1;
        let m4 = build_exog(&DecovidSpec::new(ModelId::M4, CovidKind::Positive, 25), &v).unwrap();
        assert_eq!(m4.names, vec!["post", "v_t", "v_t-1", "v_t-2"]);
        assert_eq!(m4.values[(25, 0)], 0.0);
        assert_eq!(m4.values[(26, 0)], 1.0);
        assert_eq!(m4.values[(27, 2)], 9.0);
        let m1 = build_exog(&DecovidSpec::new(ModelId::M1, CovidKind::Positive, 25), &v).unwrap();
        assert_eq!(m1.names, vec!["D", "post", "v_t-1", "v_t-2"]);
        assert_eq!(m1.values[(26, 0)], 1.0);
        assert_eq!(m1.values[(27, 2)], 0.0, "outbreak growth zeroed");
        assert_eq!(m1.values[(28, 2)], 1.5);
        let pre = build_exog(&DecovidSpec::new(ModelId::M4, CovidKind::Positive, 40), &v).unwrap();
        assert_eq!(pre.values.ncols(), 0);
        assert_eq!(pre.warnings.len(), 1);
    }

    #[test]
    fn univariate_ar1() {
        let a = vec![DMatrix::from_element(1, 1, 0.9)];
        let y = simulate(&a, &DMatrix::identity(1, 1), 700, 1);
        let m = estimate_var(&y, &names(1), 1, None).unwrap();
        assert_abs_diff_eq!(m.a[0][(0, 0)], 0.9, epsilon = 0.03);
    }

    #[test]
    fn bivariate_var2_recovery() {
        let a = bivariate();
        let y = simulate(&a, &DMatrix::identity(2, 2), 700, 2);
        let m = estimate_var(&y, &names(2), 2, None).unwrap();
        for (ah, at) in m.a.iter().zip(&a) {
            assert!((ah - at).amax() < 0.1);
        }
        // residual orthogonality and BB' = Sigma
        let x = lag_regressors(&y, 2, &m.rows);
        assert!((x.transpose() * &m.residuals).amax() < 1e-8);
        assert!(m.residuals.row_sum().amax() < 1e-8);
        assert!((&m.b * m.b.transpose() - &m.sigma).amax() < 1e-10);
    }

    #[test]
    fn univariate_irf_is_geometric() {
        let a = vec![DMatrix::from_element(1, 1, 0.5)];
        let psi = irf_matrices(&a, &DMatrix::identity(1, 1), 5);
        for (h, m) in psi.iter().enumerate() {
            assert_eq!(m[(0, 0)], 0.5f64.powi(h as i32));
        }
        let zero = irf_matrices(&[DMatrix::zeros(2, 2)], &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]), 3);
        assert_eq!(zero[0][(1, 0)], 1.0);
        assert!(zero[1..].iter().all(|m| m.amax() == 0.0));
    }

    #[test]
    fn irf_matches_companion_powers() {
        let a = bivariate();
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.8]);
        let psi = irf_matrices(&a, &b, 20);
        let c = companion(&a);
        let mut power = DMatrix::identity(4, 4);
        for m in &psi {
            let oracle = power.view((0, 0), (2, 2)) * &b;
            assert!((m - oracle).amax() < 1e-10);
            power = &c * power;
        }
        assert!(spectral_radius(&a) < 1.0);
    }

    #[test]
    fn cholesky_identify_examples() {
        assert_eq!(cholesky_identify(&DMatrix::identity(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let b = cholesky_identify(&DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0])).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let m: DMatrix<f64> = DMatrix::from_fn(4, 4, |_, _| StandardNormal.sample(&mut rng));
            let s = &m * m.transpose() + DMatrix::identity(4, 4) * 0.1;
            let b = cholesky_identify(&s).unwrap();
            assert!((&b * b.transpose() - &s).amax() < 1e-12);
        }
    }

    #[test]
    fn exog_var_matches_prepurged_var() {
        let a = bivariate();
        let mut y = simulate(&a, &DMatrix::identity(2, 2), 200, 3);
        let mut v = vec![0.0; 200];
        for t in 190..200 {
            v[t] = if t == 190 { 9.0 } else { 0.5 * v[t - 1] + 0.1 };
            y[(t, 0)] += 2.0 * v[t];
        }
        let exog = build_exog(&DecovidSpec::new(ModelId::M4, CovidKind::Positive, 189), &v).unwrap();
        let full = estimate_var(&y, &names(2), 3, Some(&exog)).unwrap();
        let purged = estimate_var_prepurged(&y, &names(2), 3, Some(&exog)).unwrap();
        for (x, z) in full.a.iter().zip(&purged.a) {
            assert!((x - z).amax() < 1e-8);
        }
        assert!((&full.sigma - &purged.sigma).amax() < 1e-8);
        assert!((&full.exog_coef - &purged.exog_coef).amax() < 1e-8);
    }

    #[test]
    fn bootstrap_preconditions_and_degenerate_case() {
        let a = vec![DMatrix::from_element(1, 1, 0.5)];
        let y = simulate(&a, &DMatrix::identity(1, 1), 100, 4);
        let m = estimate_var(&y, &names(1), 1, None).unwrap();
        assert!(bootstrap_ci(&m, 5, 0, 0.95, 1).is_err());
        assert!(bootstrap_ci(&m, 5, 199, 0.95, 1).is_err());

        // exactly deterministic system: y_t = 1 + 0.5 y_{t-1} (+ tiny excitation)
        let mut z = DMatrix::zeros(60, 1);
        z[(0, 0)] = 5.0;
        for t in 1..60 {
            z[(t, 0)] = 1.0 + 0.5 * z[(t - 1, 0)];
        }
        let zm = estimate_var(&z.rows(0, 12).into_owned(), &names(1), 1, None).unwrap();
        let r = bootstrap_ci(&zm, 4, 200, 0.9, 7).unwrap();
        let bands = r.bands.unwrap();
        for s in 0..=4 {
            assert!((bands.lower[s][(0, 0)] - r.responses[s][(0, 0)]).abs() < 1e-9);
            assert!((bands.upper[s][(0, 0)] - r.responses[s][(0, 0)]).abs() < 1e-9);
        }
    }

    #[test]
    fn bootstrap_is_reproducible_and_contains_point() {
        let a = bivariate();
        let y = simulate(&a, &DMatrix::identity(2, 2), 300, 5);
        let m = estimate_var(&y, &names(2), 2, None).unwrap();
        let r1 = bootstrap_ci(&m, 10, 200, 0.95, 42).unwrap();
        let r2 = bootstrap_ci(&m, 10, 200, 0.95, 42).unwrap();
        let (b1, b2) = (r1.bands.unwrap(), r2.bands.unwrap());
        for s in 0..=10 {
            assert_eq!(b1.lower[s], b2.lower[s]);
            assert!(b1.lower[s].iter().zip(r1.responses[s].iter()).all(|(l, p)| l <= p));
            assert!(b1.upper[s].iter().zip(r1.responses[s].iter()).all(|(u, p)| u >= p));
        }
    }

    #[test]
    fn identity_b_gives_residual_shocks() {
        let a = bivariate();
        let y = simulate(&a, &DMatrix::identity(2, 2), 200, 6);
        let mut m = estimate_var(&y, &names(2), 2, None).unwrap();
        m.b = DMatrix::identity(2, 2);
        let e = orthogonalized_shocks(&m).unwrap();
        assert!((e - &m.residuals).amax() < 1e-14);
        m.b[(1, 1)] = 0.0;
        assert!(orthogonalized_shocks(&m).is_err());
    }

    #[test]
    fn too_short_sample_and_bad_lag() {
        let y = DMatrix::from_fn(8, 2, |i, j| (i * 3 + j) as f64 % 5.0);
        assert!(matches!(estimate_var(&y, &names(2), 3, None), Err(Error::InsufficientData { .. })));
        assert!(estimate_var(&y, &names(2), 0, None).is_err());
    }
}
