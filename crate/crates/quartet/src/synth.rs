//! Synthetic correlated regression data.
//!
//! Rows of features are drawn i.i.d. from `N(0, Sigma(rho))` where `Sigma`
//! has unit diagonal and constant off-diagonal `rho`, and the target is
//!
//! ```text
//! y = sin(theta1 * (x1 + theta2 * x2)) + eps,   eps ~ N(0, sigma_eps^2)
//! ```
//!
//! With the default parameters (`theta1 = 0.6`, `theta2 = 1/3`) the signal is
//! `sin((3 x1 + x2) / 5)`. The noise level is a standard deviation, not a
//! variance. Train and test sets come from disjoint labeled substreams of the
//! same master seed, so generation is byte-deterministic and thread-safe.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Substream;

/// Parameters of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Scale inside the sine.
    pub theta1: f64,
    /// Mixing weight of `x2` relative to `x1`.
    pub theta2: f64,
    /// Equicorrelation of the features, in `[0, 1)`.
    pub rho: f64,
    /// Noise standard deviation, `>= 0`.
    pub sigma_eps: f64,
    /// Number of features (>= 1; the target uses only `x1`, `x2`).
    pub n_features: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            theta1: 0.6,
            theta2: 1.0 / 3.0,
            rho: 0.9,
            sigma_eps: 1.0 / 3.0,
            n_features: 3,
            n_train: 1000,
            n_test: 10_000,
            seed: 1568,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho={} outside [0, 1)", self.rho)));
        }
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return Err(Error::Config(format!("sigma_eps={} must be >= 0", self.sigma_eps)));
        }
        if self.n_features == 0 {
            return Err(Error::Config("n_features must be >= 1".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be >= 1".into()));
        }
        if !self.theta1.is_finite() || !self.theta2.is_finite() {
            return Err(Error::Config("theta1/theta2 must be finite".into()));
        }
        Ok(())
    }

    /// Signal value before noise for a feature row.
    pub fn signal(&self, x: &[f64]) -> f64 {
        let x2 = if x.len() > 1 { x[1] } else { 0.0 };
        (self.theta1 * (x[0] + self.theta2 * x2)).sin()
    }
}

/// Lower-triangular Cholesky factor of the `p x p` equicorrelation matrix.
///
/// The input matrix has 1 on the diagonal and `rho` elsewhere; `rho` must lie
/// in `[0, 1)` so the matrix is positive definite.
pub fn equicorrelation_cholesky(p: usize, rho: f64) -> Result<Matrix> {
    if p == 0 {
        return Err(Error::Config("p must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Config(format!("rho={rho} outside [0, 1)")));
    }
    let mut sigma = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            sigma.set(i, j, if i == j { 1.0 } else { rho });
        }
    }
    cholesky(&sigma)
}

/// Plain Cholesky decomposition of a symmetric positive definite matrix.
pub(crate) fn cholesky(a: &Matrix) -> Result<Matrix> {
    let p = a.nrows();
    let mut l = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Config("matrix not positive definite".into()));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Generate a (train, test) pair per the configuration.
///
/// Features and noise come from the labeled substreams `synth/{split}/x` and
/// `synth/{split}/eps` of `config.seed`, so the two splits are independent
/// and each is reproducible in isolation.
pub fn generate(config: &GenConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let chol = equicorrelation_cholesky(config.n_features, config.rho)?;
    let train = generate_split(config, &chol, "train", config.n_train)?;
    let test = generate_split(config, &chol, "test", config.n_test)?;
    Ok((train, test))
}

fn generate_split(config: &GenConfig, chol: &Matrix, split: &str, n: usize) -> Result<Dataset> {
    let p = config.n_features;
    let mut xs = Substream::new(config.seed, &format!("synth/{split}/x"));
    let mut es = Substream::new(config.seed, &format!("synth/{split}/eps"));
    let mut rows = Matrix::zeros(n, p + 1);
    let mut z = vec![0.0; p];
    let mut x = vec![0.0; p];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = xs.standard_normal();
        }
        for j in 0..p {
            let mut v = 0.0;
            for k in 0..=j {
                v += chol.get(j, k) * z[k];
            }
            x[j] = v;
        }
        let y = config.signal(&x) + config.sigma_eps * es.standard_normal();
        rows.set(i, 0, y);
        for j in 0..p {
            rows.set(i, j + 1, x[j]);
        }
    }
    let mut names = Vec::with_capacity(p + 1);
    names.push("y".to_string());
    for j in 1..=p {
        names.push(format!("x{j}"));
    }
    Dataset::new(names, "y", rows)
}
