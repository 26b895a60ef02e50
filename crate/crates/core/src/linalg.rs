//! Small dense linear-algebra kernels: least squares with standard errors,
//! ordered SVD, Cholesky, and correlation measures.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance below which a column is treated as lying in the span of
/// the columns before it (sine of the angle to that span).
const COLLINEAR_TOL: f64 = 1e-9;

/// Ordinary least squares fit of one response on a design matrix.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Residual variance with an `n - k` denominator (NaN when `n == k`).
    pub sigma2: f64,
    pub std_errors: DVector<f64>,
    pub t_stats: DVector<f64>,
}

/// Indices of columns that are (numerically) linear combinations of earlier columns.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let (n, k) = x.shape();
    if n == 0 {
        return (0..k).collect();
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut bad = Vec::new();
    for j in 0..k {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= COLLINEAR_TOL * norm {
            bad.push(j);
        } else {
            basis.push(r / rn);
        }
    }
    bad
}

fn check_rank(x: &DMatrix<f64>, names: Option<&[String]>) -> Result<()> {
    let bad = collinear_columns(x);
    if bad.is_empty() {
        return Ok(());
    }
    let columns = bad
        .into_iter()
        .map(|j| match names {
            Some(n) if j < n.len() => n[j].clone(),
            _ => format!("#{j}"),
        })
        .collect();
    Err(Error::RankDeficient { columns })
}

/// Inverse of `X'X` for a full-column-rank `X`, via the QR factor.
fn xtx_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = x.clone().qr().r();
    let k = r.ncols();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { columns: vec![] })?;
    Ok(&rinv * rinv.transpose())
}

/// Least squares of `y` on `x`; `names` label columns in rank errors.
pub fn ols_named(x: &DMatrix<f64>, y: &DVector<f64>, names: Option<&[String]>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Misaligned(format!("design has {n} rows, response has {}", y.len())));
    }
    if n < k {
        return Err(Error::insufficient("least squares", k, n));
    }
    check_rank(x, names)?;
    let xtx_inv = xtx_inverse(x)?;
    let coefficients = &xtx_inv * (x.transpose() * y);
    let fitted = x * &coefficients;
    let residuals = y - &fitted;
    let sigma2 = if n > k {
        residuals.norm_squared() / (n - k) as f64
    } else {
        f64::NAN
    };
    let std_errors = DVector::from_iterator(k, (0..k).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()));
    let t_stats = coefficients.component_div(&std_errors);
    Ok(OlsFit {
        coefficients,
        fitted,
        residuals,
        sigma2,
        std_errors,
        t_stats,
    })
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    ols_named(x, y, None)
}

/// Least squares of every column of `y` on the same design. Returns the
/// `k x m` coefficient matrix and the `n x m` residual matrix.
pub fn ols_multi(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, k) = x.shape();
    if y.nrows() != n {
        return Err(Error::Misaligned(format!("design has {n} rows, response has {}", y.nrows())));
    }
    if n < k {
        return Err(Error::insufficient("least squares", k, n));
    }
    check_rank(x, None)?;
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let coef = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { columns: vec![] })?;
    let resid = y - x * &coef;
    Ok((coef, resid))
}

/// Thin SVD with singular values sorted in descending order.
pub struct OrderedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn ordered_svd(m: &DMatrix<f64>) -> OrderedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V'");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let k = order.len();
    let mut uo = DMatrix::zeros(u.nrows(), k);
    let mut vo = DMatrix::zeros(vt.ncols(), k);
    let mut so = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        uo.set_column(dst, &u.column(src));
        vo.set_column(dst, &vt.row(src).transpose());
        so[dst] = s[src];
    }
    OrderedSvd {
        u: uo,
        singular_values: so,
        v: vo,
    }
}

/// Lower-triangular Cholesky factor with positive diagonal.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::invalid("Cholesky factor of a non-square matrix"));
    }
    let sym = (m + m.transpose()) * 0.5;
    if (&sym - m).amax() > 1e-10 * m.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    nalgebra::Cholesky::new(sym)
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with `n - 1` denominator.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Pearson correlation; NaN when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

fn orthonormal_centered_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mu = col.mean();
        col.add_scalar_mut(-mu);
    }
    let svd = ordered_svd(&c);
    let tol = svd.singular_values.get(0).copied().unwrap_or(0.0) * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    svd.u.columns(0, rank).into_owned()
}

/// Canonical correlations between the column spaces of `a` and `b` (both `T x k`),
/// in descending order.
pub fn canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let qa = orthonormal_centered_basis(a);
    let qb = orthonormal_centered_basis(b);
    let cross = qa.transpose() * qb;
    let mut s = ordered_svd(&cross).singular_values;
    s.apply(|x| *x = x.min(1.0));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ols_recovers_exact_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = ols(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], 2.0, epsilon = 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn ols_standard_errors_match_textbook_formula() {
        // y on a constant: se = s / sqrt(n)
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0, 7.0]);
        let x = DMatrix::from_element(4, 1, 1.0);
        let fit = ols(&x, &y).unwrap();
        let s = sample_sd(y.as_slice());
        assert_abs_diff_eq!(fit.std_errors[0], s / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.t_stats[0], 3.5 / (s / 2.0), epsilon = 1e-10);
    }

    #[test]
    fn rank_deficiency_names_the_later_column() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 1.0, 2.0, 1.0, 1.0, 2.0, 5.0]);
        let names: Vec<String> = ["const", "twice", "z"].iter().map(|s| s.to_string()).collect();
        let err = ols_named(&x, &DVector::zeros(3), Some(&names)).unwrap_err();
        match err {
            Error::RankDeficient { columns } => assert_eq!(columns, vec!["twice".to_string()]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        let svd = ordered_svd(&m);
        assert!(svd.singular_values[0] >= svd.singular_values[1]);
        let back = &svd.u * DMatrix::from_diagonal(&svd.singular_values) * svd.v.transpose();
        assert!((back - m).amax() < 1e-12);
    }

    #[test]
    fn cholesky_hand_example() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let b = cholesky_lower(&s).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]);
        assert!((b - want).amax() < 1e-14);
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_lower(&not_pd), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn canonical_correlation_is_rotation_invariant() {
        let a = DMatrix::from_fn(50, 2, |i, j| ((i * (j + 2)) as f64 * 0.37).sin());
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let b = &a * rot * 3.0;
        let cc = canonical_correlations(&a, &b);
        assert_abs_diff_eq!(cc[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(cc[1], 1.0, epsilon = 1e-10);
    }
}
