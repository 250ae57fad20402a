//! Ordinary least squares with the classical inference quantities.
//!
//! The production fit runs a Householder QR factorization of the design
//! matrix; `fit_linear_normal_equations` solves the normal equations through
//! a Cholesky factorization instead, as an independent algebraic route the
//! test suite holds against the QR path.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{Model, LABEL_LINEAR};

/// OLS fit with intercept plus per-coefficient inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub label: String,
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Unbiased residual variance estimate on `n - p - 1` degrees of freedom.
    pub residual_variance: f64,
}

impl LinearFit {
    pub(crate) fn predict_unchecked(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let row = x.row(i);
                self.intercept
                    + row.iter().zip(&self.coefficients).map(|(v, b)| v * b).sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let p = self.feature_names.len();
        if self.coefficients.len() != p
            || self.standard_errors.len() != p
            || self.t_statistics.len() != p
            || self.p_values.len() != p
        {
            return Err(Error::Serde("linear fit vector lengths disagree".into()));
        }
        if self.residual_variance < 0.0 {
            return Err(Error::Serde("negative residual variance".into()));
        }
        Ok(())
    }
}

/// Build the `n x (p+1)` design matrix with a leading intercept column.
fn design(train: &Dataset) -> (Matrix, Vec<f64>) {
    let x = train.features();
    let (n, p) = (x.nrows(), x.ncols());
    let mut d = Matrix::zeros(n, p + 1);
    for i in 0..n {
        d.set(i, 0, 1.0);
        for j in 0..p {
            d.set(i, j + 1, x.get(i, j));
        }
    }
    (d, train.target())
}

/// In-place Householder QR of `a` (n x m, n >= m), transforming `y` by the
/// same orthogonal factor. Returns an error if a diagonal of R collapses.
fn householder_qr(a: &mut Matrix, y: &mut [f64]) -> Result<()> {
    let (n, m) = (a.nrows(), a.ncols());
    let scale = a.data().iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for k in 0..m {
        let mut norm2 = 0.0;
        for i in k..n {
            let v = a.get(i, k);
            norm2 += v * v;
        }
        let norm = norm2.sqrt();
        if norm <= 1e-12 * scale {
            return Err(Error::SingularDesign(format!("column {k} is numerically dependent")));
        }
        let alpha = if a.get(k, k) >= 0.0 { -norm } else { norm };
        // v = x - alpha e1, applied implicitly.
        let v0 = a.get(k, k) - alpha;
        let vnorm2 = norm2 - 2.0 * a.get(k, k) * alpha + alpha * alpha;
        // Apply H = I - 2 v v^T / |v|^2 to the trailing columns and to y.
        for j in (k + 1)..m {
            let mut dot = v0 * a.get(k, j);
            for i in (k + 1)..n {
                dot += a.get(i, k) * a.get(i, j);
            }
            let f = 2.0 * dot / vnorm2;
            a.set(k, j, a.get(k, j) - f * v0);
            for i in (k + 1)..n {
                a.set(i, j, a.get(i, j) - f * a.get(i, k));
            }
        }
        let mut dot = v0 * y[k];
        for i in (k + 1)..n {
            dot += a.get(i, k) * y[i];
        }
        let f = 2.0 * dot / vnorm2;
        y[k] -= f * v0;
        for i in (k + 1)..n {
            y[i] -= f * a.get(i, k);
        }
        a.set(k, k, alpha);
        for i in (k + 1)..n {
            a.set(i, k, 0.0);
        }
    }
    Ok(())
}

fn back_substitute(r: &Matrix, rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut beta = vec![0.0; m];
    for k in (0..m).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..m {
            s -= r.get(k, j) * beta[j];
        }
        beta[k] = s / r.get(k, k);
    }
    beta
}

/// Diagonal of `(X'X)^{-1} = R^{-1} R^{-T}`: squared row norms of `R^{-1}`.
fn xtx_inverse_diagonal(r: &Matrix, m: usize) -> Vec<f64> {
    let mut rinv = Matrix::zeros(m, m);
    for col in 0..m {
        // Solve R z = e_col.
        let mut e = vec![0.0; m];
        e[col] = 1.0;
        let z = back_substitute(r, &e);
        for row in 0..m {
            rinv.set(row, col, z[row]);
        }
    }
    (0..m)
        .map(|i| (0..m).map(|j| rinv.get(i, j) * rinv.get(i, j)).sum())
        .collect()
}

/// Fit OLS with intercept via Householder QR.
pub fn fit_linear(train: &Dataset) -> Result<Model> {
    let p = train.n_features();
    let n = train.n_rows();
    if n <= p + 1 {
        return Err(Error::Config(format!("need n > p + 1 rows, got n={n}, p={p}")));
    }
    let (mut d, mut y) = design(train);
    let m = p + 1;
    householder_qr(&mut d, &mut y)?;
    let beta = back_substitute(&d, &y[..m]);
    let rss: f64 = y[m..].iter().map(|v| v * v).sum();
    let df = (n - m) as f64;
    let s2 = rss / df;
    let diag = xtx_inverse_diagonal(&d, m);
    let tdist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    let mut se = Vec::with_capacity(p);
    let mut tstat = Vec::with_capacity(p);
    let mut pval = Vec::with_capacity(p);
    for j in 1..m {
        let s = (s2 * diag[j]).sqrt();
        let t = if s > 0.0 { beta[j] / s } else { 0.0 };
        se.push(s);
        tstat.push(t);
        pval.push(2.0 * (1.0 - tdist.cdf(t.abs())));
    }
    Ok(Model::Linear(LinearFit {
        label: LABEL_LINEAR.to_string(),
        feature_names: train.feature_names().to_vec(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        standard_errors: se,
        t_statistics: tstat,
        p_values: pval,
        residual_variance: s2,
    }))
}

/// OLS coefficients `(intercept, beta)` via the normal equations, solved with
/// a Cholesky factorization of `X'X`. Independent of the QR path.
pub fn fit_linear_normal_equations(train: &Dataset) -> Result<(f64, Vec<f64>)> {
    let (d, y) = design(train);
    let (n, m) = (d.nrows(), d.ncols());
    let mut xtx = Matrix::zeros(m, m);
    let mut xty = vec![0.0; m];
    for i in 0..n {
        let row = d.row(i);
        for j in 0..m {
            xty[j] += row[j] * y[i];
            for k in j..m {
                xtx.set(j, k, xtx.get(j, k) + row[j] * row[k]);
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            xtx.set(j, k, xtx.get(k, j));
        }
    }
    let l = crate::synth::cholesky(&xtx)
        .map_err(|_| Error::SingularDesign("normal equations not positive definite".into()))?;
    // Forward solve L z = X'y, then back solve L' beta = z.
    let mut z = vec![0.0; m];
    for i in 0..m {
        let mut s = xty[i];
        for k in 0..i {
            s -= l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    let mut beta = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = z[i];
        for k in (i + 1)..m {
            s -= l.get(k, i) * beta[k];
        }
        beta[i] = s / l.get(i, i);
    }
    Ok((beta[0], beta[1..].to_vec()))
}
