//! Principal-component factor estimation, factor comparisons and the
//! squared-panel volatility factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ordered_svd, pearson};
use crate::month::Month;
use crate::transform::standardize;

/// Estimated factors and loadings under the normalization `F'F/T = I`,
/// `Lambda'Lambda` diagonal.
#[derive(Debug, Clone)]
pub struct FactorSet {
    /// `T x r` factor scores.
    pub f: DMatrix<f64>,
    /// `N x r` loadings.
    pub lambda: DMatrix<f64>,
    /// Share of total variation per factor: `sigma_k^2 / sum_j sigma_j^2`.
    pub variance_shares: Vec<f64>,
    /// All singular values of the panel, descending.
    pub singular_values: Vec<f64>,
    /// Column means and standard deviations removed before factoring. Zeros
    /// and ones when the panel was supplied already standardized.
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl FactorSet {
    pub fn r(&self) -> usize {
        self.f.ncols()
    }

    /// `F Lambda'`, in the units of the factored panel.
    pub fn common_component(&self) -> DMatrix<f64> {
        &self.f * self.lambda.transpose()
    }

    pub fn factor(&self, k: usize) -> Vec<f64> {
        self.f.column(k).iter().copied().collect()
    }
}

fn numerical_rank(s: &DVector<f64>, shape: (usize, usize)) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    let tol = smax * shape.0.max(shape.1) as f64 * f64::EPSILON;
    s.iter().filter(|&&x| x > tol).count()
}

/// Principal components of a standardized, fully observed `T x N` panel.
///
/// `F = sqrt(T) U_r`, `Lambda = X'F / T`. Each factor is signed so that its
/// largest absolute loading is non-negative.
pub fn pca(panel: &DMatrix<f64>, r: usize) -> Result<FactorSet> {
    let (t, n) = panel.shape();
    if t == 0 || n == 0 {
        return Err(Error::Empty("panel".into()));
    }
    if panel.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("panel has missing or non-finite cells; impute before factoring"));
    }
    if r == 0 {
        return Err(Error::invalid("number of factors must be positive"));
    }
    let svd = ordered_svd(panel);
    let rank = numerical_rank(&svd.singular_values, (t, n));
    if r > rank {
        return Err(Error::invalid(format!("{r} factors requested but the panel has rank {rank}")));
    }
    let sqrt_t = (t as f64).sqrt();
    let mut f = svd.u.columns(0, r) * sqrt_t;
    let mut lambda = panel.transpose() * &f / t as f64;
    for k in 0..r {
        let col = lambda.column(k);
        let lead = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            f.column_mut(k).neg_mut();
            lambda.column_mut(k).neg_mut();
        }
    }
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let variance_shares = (0..r).map(|k| svd.singular_values[k].powi(2) / total).collect();
    Ok(FactorSet {
        f,
        lambda,
        variance_shares,
        singular_values: svd.singular_values.iter().copied().collect(),
        means: vec![0.0; n],
        sds: vec![1.0; n],
    })
}

/// Standardizes the panel (`n - 1` moments) and then runs [`pca`], keeping
/// the moments in the result.
pub fn pca_standardized(panel: &DMatrix<f64>, names: &[String], r: usize) -> Result<FactorSet> {
    let std = standardize(panel, names)?;
    let mut fs = pca(&std.values, r)?;
    fs.means = std.means;
    fs.sds = std.sds;
    Ok(fs)
}

/// Pearson correlations between every factor of `a` (rows) and every factor
/// of `b` (columns) over the months both cover inside `window`. Signs are
/// reported as they are.
pub fn factor_correlations(
    a: &DMatrix<f64>,
    a_dates: &[Month],
    b: &DMatrix<f64>,
    b_dates: &[Month],
    window: (Month, Month),
) -> Result<DMatrix<f64>> {
    if a.nrows() != a_dates.len() || b.nrows() != b_dates.len() {
        return Err(Error::Misaligned("factor rows and dates differ in length".into()));
    }
    let pairs: Vec<(usize, usize)> = a_dates
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= window.0 && **d <= window.1)
        .filter_map(|(i, d)| b_dates.iter().position(|e| e == d).map(|j| (i, j)))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Empty(format!("factor overlap in {}..{}", window.0, window.1)));
    }
    Ok(DMatrix::from_fn(a.ncols(), b.ncols(), |k, l| {
        let xa: Vec<f64> = pairs.iter().map(|&(i, _)| a[(i, k)]).collect();
        let xb: Vec<f64> = pairs.iter().map(|&(_, j)| b[(j, l)]).collect();
        pearson(&xa, &xb)
    }))
}

/// First principal component of the element-wise squared panel, rescaled to
/// zero mean and unit (`n - 1`) variance.
pub fn squared_panel_factor(panel: &DMatrix<f64>) -> Result<Vec<f64>> {
    let names: Vec<String> = (0..panel.ncols()).map(|j| format!("squared column {j}")).collect();
    let squared = panel.map(|x| x * x);
    let fs = pca_standardized(&squared, &names, 1)?;
    let g = fs.factor(0);
    let std = standardize(&DMatrix::from_column_slice(g.len(), 1, &g), &["G".to_string()])?;
    Ok(std.values.iter().copied().collect())
}
