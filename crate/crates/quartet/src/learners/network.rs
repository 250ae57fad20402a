//! Feed-forward network trained by resilient backpropagation (RPROP+).
//!
//! Architecture: logistic hidden layers, identity output, full-batch loss
//! `E = 1/2 * sum_i (yhat_i - y_i)^2`. RPROP+ keeps one step size per weight,
//! adapts it from gradient sign agreement, and backtracks the previous step
//! on a sign flip. Training stops when the largest absolute partial
//! derivative drops below `grad_threshold`, or at `max_epochs` with
//! `converged = false`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Substream;

use super::{Model, LABEL_NETWORK};

// RPROP+ step-size schedule (standard published constants).
const ETA_PLUS: f64 = 1.2;
const ETA_MINUS: f64 = 0.5;
const DELTA_ZERO: f64 = 0.1;
const DELTA_MAX: f64 = 50.0;
const DELTA_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub hidden: Vec<usize>,
    /// Stop when `max |dE/dw| < grad_threshold`.
    pub grad_threshold: f64,
    pub max_epochs: usize,
    /// Selects the `network/init/{k}` weight-init substream.
    pub init_index: u64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { hidden: vec![8, 4], grad_threshold: 0.05, max_epochs: 100_000, init_index: 0 }
    }
}

/// A fitted network: weights per layer (rows = output units).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFit {
    pub label: String,
    pub feature_names: Vec<String>,
    /// `[p, hidden..., 1]`.
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub grad_threshold: f64,
    pub max_epochs: usize,
    pub epochs_run: usize,
    pub converged: bool,
    pub final_max_grad: f64,
    pub seed: u64,
    pub init_index: u64,
}

impl NetworkFit {
    pub(crate) fn predict_unchecked(&self, x: &Matrix) -> Vec<f64> {
        let net = Net::from_fit(self);
        let mut bufs = net.buffers();
        (0..x.nrows()).map(|i| net.forward(x.row(i), &mut bufs)).collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ls = &self.layer_sizes;
        if ls.len() < 2 || *ls.last().unwrap() != 1 || ls[0] != self.feature_names.len() {
            return Err(Error::Serde("network layer sizes malformed".into()));
        }
        if self.weights.len() != ls.len() - 1 || self.biases.len() != ls.len() - 1 {
            return Err(Error::Serde("network layer count mismatch".into()));
        }
        for l in 0..self.weights.len() {
            if self.weights[l].nrows() != ls[l + 1]
                || self.weights[l].ncols() != ls[l]
                || self.biases[l].len() != ls[l + 1]
            {
                return Err(Error::Serde(format!("network layer {l} dimensions do not chain")));
            }
        }
        Ok(())
    }
}

/// Flat parameter view of a network: weights then bias per layer.
struct Net {
    sizes: Vec<usize>,
    params: Vec<f64>,
    /// Offset of each layer's weight block; biases follow the weights.
    offsets: Vec<usize>,
}

impl Net {
    fn layout(sizes: &[usize]) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut total = 0usize;
        for l in 0..sizes.len() - 1 {
            offsets.push(total);
            total += sizes[l + 1] * sizes[l] + sizes[l + 1];
        }
        (offsets, total)
    }

    fn new(sizes: Vec<usize>, params: Vec<f64>) -> Self {
        let (offsets, total) = Self::layout(&sizes);
        debug_assert_eq!(total, params.len());
        Self { sizes, params, offsets }
    }

    fn from_fit(fit: &NetworkFit) -> Self {
        let (offsets, total) = Self::layout(&fit.layer_sizes);
        let mut params = Vec::with_capacity(total);
        for l in 0..fit.weights.len() {
            params.extend_from_slice(fit.weights[l].data());
            params.extend_from_slice(&fit.biases[l]);
        }
        Self { sizes: fit.layer_sizes.clone(), params, offsets }
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    #[inline]
    fn weight_block(&self, l: usize) -> (&[f64], &[f64]) {
        let (nin, nout) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offsets[l];
        let w = &self.params[off..off + nout * nin];
        let b = &self.params[off + nout * nin..off + nout * nin + nout];
        (w, b)
    }

    fn buffers(&self) -> Vec<Vec<f64>> {
        self.sizes.iter().map(|&s| vec![0.0; s]).collect()
    }

    /// Forward pass of one row; activations land in `bufs`.
    fn forward(&self, row: &[f64], bufs: &mut [Vec<f64>]) -> f64 {
        bufs[0].copy_from_slice(row);
        for l in 0..self.n_layers() {
            let (w, b) = self.weight_block(l);
            let nin = self.sizes[l];
            let last = l == self.n_layers() - 1;
            let (head, tail) = bufs.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for (j, o) in out.iter_mut().enumerate() {
                let mut z = b[j];
                let wrow = &w[j * nin..(j + 1) * nin];
                for (wi, xi) in wrow.iter().zip(input.iter()) {
                    z += wi * xi;
                }
                *o = if last { z } else { 1.0 / (1.0 + (-z).exp()) };
            }
        }
        bufs[self.sizes.len() - 1][0]
    }

    /// Full-batch loss `E = 1/2 sum (yhat - y)^2` and its gradient.
    fn loss_and_gradient(&self, x: &Matrix, y: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut bufs = self.buffers();
        let mut deltas: Vec<Vec<f64>> = self.sizes[1..].iter().map(|&s| vec![0.0; s]).collect();
        let mut loss = 0.0;
        for i in 0..x.nrows() {
            let yhat = self.forward(x.row(i), &mut bufs);
            let err = yhat - y[i];
            loss += 0.5 * err * err;
            // Output layer: identity activation.
            let top = self.n_layers() - 1;
            deltas[top][0] = err;
            for l in (0..top).rev() {
                let (w_above, _) = self.weight_block(l + 1);
                let nin = self.sizes[l + 1];
                let (below, above) = deltas.split_at_mut(l + 1);
                let d_above = &above[0];
                let d = &mut below[l];
                for j in 0..nin {
                    let mut s = 0.0;
                    for (k, da) in d_above.iter().enumerate() {
                        s += w_above[k * nin + j] * da;
                    }
                    let a = bufs[l + 1][j];
                    d[j] = s * a * (1.0 - a);
                }
            }
            for l in 0..self.n_layers() {
                let nin = self.sizes[l];
                let nout = self.sizes[l + 1];
                let off = self.offsets[l];
                let input = &bufs[l];
                let d = &deltas[l];
                for j in 0..nout {
                    let g = &mut grad[off + j * nin..off + (j + 1) * nin];
                    let dj = d[j];
                    for (gk, xk) in g.iter_mut().zip(input.iter()) {
                        *gk += dj * xk;
                    }
                }
                let gb = &mut grad[off + nout * nin..off + nout * nin + nout];
                for (gj, dj) in gb.iter_mut().zip(d.iter()) {
                    *gj += dj;
                }
            }
        }
        (loss, grad)
    }
}

/// Loss at `params` for a given architecture; the finite-difference oracle in
/// the tests drives this directly.
pub fn network_loss(sizes: &[usize], params: &[f64], x: &Matrix, y: &[f64]) -> f64 {
    let net = Net::new(sizes.to_vec(), params.to_vec());
    let mut bufs = net.buffers();
    (0..x.nrows()).map(|i| {
        let e = net.forward(x.row(i), &mut bufs) - y[i];
        0.5 * e * e
    }).sum()
}

/// Analytic gradient of the full-batch loss at `params`.
pub fn network_gradient(sizes: &[usize], params: &[f64], x: &Matrix, y: &[f64]) -> Vec<f64> {
    let net = Net::new(sizes.to_vec(), params.to_vec());
    net.loss_and_gradient(x, y).1
}

/// Train the network from a seeded `N(0,1)` initialization.
pub fn fit_network(train: &Dataset, params: &NetworkParams, seed: u64) -> Result<Model> {
    if train.n_rows() == 0 {
        return Err(Error::Config("empty training set".into()));
    }
    if params.hidden.is_empty() || params.hidden.iter().any(|&h| h == 0) {
        return Err(Error::Config("hidden layer sizes must be positive".into()));
    }
    if !(params.grad_threshold > 0.0) {
        return Err(Error::Config("grad_threshold must be positive".into()));
    }
    let p = train.n_features();
    let mut sizes = Vec::with_capacity(params.hidden.len() + 2);
    sizes.push(p);
    sizes.extend_from_slice(&params.hidden);
    sizes.push(1);

    let (_, total) = Net::layout(&sizes);
    let mut rng = Substream::new(seed, &format!("network/init/{}", params.init_index));
    let init: Vec<f64> = (0..total).map(|_| rng.standard_normal()).collect();
    let mut net = Net::new(sizes.clone(), init);

    let x = train.features();
    let y = train.target();

    let mut step = vec![DELTA_ZERO; total];
    let mut prev_grad = vec![0.0; total];
    let mut prev_dw = vec![0.0; total];
    let mut epochs_run = 0usize;
    let mut converged = false;

    let final_max_grad = loop {
        let (_, grad) = net.loss_and_gradient(&x, &y);
        let max_grad = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if max_grad < params.grad_threshold {
            converged = true;
            break max_grad;
        }
        if epochs_run >= params.max_epochs {
            break max_grad;
        }
        for k in 0..total {
            let sign = prev_grad[k] * grad[k];
            if sign > 0.0 {
                step[k] = (step[k] * ETA_PLUS).min(DELTA_MAX);
                let dw = -grad[k].signum() * step[k];
                net.params[k] += dw;
                prev_dw[k] = dw;
                prev_grad[k] = grad[k];
            } else if sign < 0.0 {
                // Backtrack the previous step, shrink, and skip one update.
                net.params[k] -= prev_dw[k];
                step[k] = (step[k] * ETA_MINUS).max(DELTA_MIN);
                prev_dw[k] = 0.0;
                prev_grad[k] = 0.0;
            } else {
                let dw = -grad[k].signum() * step[k];
                net.params[k] += dw;
                prev_dw[k] = dw;
                prev_grad[k] = grad[k];
            }
        }
        epochs_run += 1;
    };

    // Unpack flat parameters into per-layer blocks.
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for l in 0..sizes.len() - 1 {
        let (w, b) = net.weight_block(l);
        weights.push(Matrix::from_vec(sizes[l + 1], sizes[l], w.to_vec()));
        biases.push(b.to_vec());
    }

    Ok(Model::Network(NetworkFit {
        label: LABEL_NETWORK.to_string(),
        feature_names: train.feature_names().to_vec(),
        layer_sizes: sizes,
        weights,
        biases,
        grad_threshold: params.grad_threshold,
        max_epochs: params.max_epochs,
        epochs_run,
        converged,
        final_max_grad,
        seed,
        init_index: params.init_index,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GenConfig};

    fn network_fit(m: &Model) -> &NetworkFit {
        match m {
            Model::Network(f) => f,
            _ => unreachable!(),
        }
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let cfg = GenConfig { n_train: 20, n_test: 5, seed: 17, ..GenConfig::default() };
        let (train, _) = generate(&cfg).unwrap();
        let x = train.features();
        let y = train.target();
        let sizes = [3usize, 8, 4, 1];
        let (_, total) = Net::layout(&sizes);
        let mut rng = Substream::new(17, "network/init/0");
        let params: Vec<f64> = (0..total).map(|_| rng.standard_normal()).collect();
        let analytic = network_gradient(&sizes, &params, &x, &y);
        for k in 0..total {
            let h = 1e-5 * params[k].abs().max(1.0);
            let mut up = params.clone();
            up[k] += h;
            let mut dn = params.clone();
            dn[k] -= h;
            let num = (network_loss(&sizes, &up, &x, &y) - network_loss(&sizes, &dn, &x, &y))
                / (2.0 * h);
            let denom = analytic[k].abs().max(num.abs()).max(1e-6);
            assert!(
                (analytic[k] - num).abs() / denom < 1e-4,
                "weight {k}: analytic {} vs numeric {num}",
                analytic[k]
            );
        }
    }

    #[test]
    fn converged_flag_reflects_threshold() {
        let cfg = GenConfig { n_train: 60, n_test: 5, seed: 23, ..GenConfig::default() };
        let (train, _) = generate(&cfg).unwrap();
        let m = fit_network(
            &train,
            &NetworkParams { max_epochs: 3, grad_threshold: 1e-9, ..Default::default() },
            23,
        )
        .unwrap();
        let f = network_fit(&m);
        assert!(!f.converged);
        assert_eq!(f.epochs_run, 3);
        // Converged fits end below the threshold.
        let m2 = fit_network(
            &train,
            &NetworkParams { grad_threshold: 5.0, max_epochs: 100_000, ..Default::default() },
            23,
        )
        .unwrap();
        let f2 = network_fit(&m2);
        assert!(f2.converged);
        assert!(f2.final_max_grad < 5.0);
    }

    #[test]
    fn linear_signal_is_learned_well() {
        // Noiseless y = x1: the logistic net approximates a linear map on the
        // sampled region.
        let mut s = Substream::new(40, "net/linear");
        let mut rows = Vec::new();
        for _ in 0..400 {
            let x1 = s.standard_normal();
            let x2 = s.standard_normal();
            let x3 = s.standard_normal();
            rows.push(vec![x1, x1, x2, x3]);
        }
        let all = Dataset::new(
            vec!["y".into(), "x1".into(), "x2".into(), "x3".into()],
            "y",
            Matrix::from_rows(&rows),
        )
        .unwrap();
        let m = fit_network(
            &all,
            &NetworkParams { max_epochs: 20_000, ..Default::default() },
            40,
        )
        .unwrap();
        let f = network_fit(&m);
        assert!(f.converged, "did not converge: max_grad={}", f.final_max_grad);
        let mut s2 = Substream::new(41, "net/linear/test");
        let mut test_rows = Vec::new();
        for _ in 0..400 {
            let x1 = s2.standard_normal();
            test_rows.push(vec![x1, s2.standard_normal(), s2.standard_normal()]);
        }
        let xt = Matrix::from_rows(&test_rows);
        let pred = m.predict(&xt).unwrap();
        let y: Vec<f64> = test_rows.iter().map(|r| r[0]).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sse: f64 = pred.iter().zip(&y).map(|(p, v)| (p - v) * (p - v)).sum();
        let r2 = 1.0 - sse / sst;
        assert!(r2 >= 0.99, "r2={r2}");
    }

    #[test]
    fn fit_is_deterministic() {
        let cfg = GenConfig { n_train: 80, n_test: 5, seed: 3, ..GenConfig::default() };
        let (train, _) = generate(&cfg).unwrap();
        let p = NetworkParams { max_epochs: 200, ..Default::default() };
        let a = fit_network(&train, &p, 3).unwrap();
        let b = fit_network(&train, &p, 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn different_init_substreams_differ() {
        let cfg = GenConfig { n_train: 80, n_test: 5, seed: 3, ..GenConfig::default() };
        let (train, _) = generate(&cfg).unwrap();
        let a = fit_network(&train, &NetworkParams { max_epochs: 50, init_index: 0, ..Default::default() }, 3).unwrap();
        let b = fit_network(&train, &NetworkParams { max_epochs: 50, init_index: 1, ..Default::default() }, 3).unwrap();
        assert_ne!(a.to_json(), b.to_json());
    }

    #[test]
    fn finite_forward_on_finite_input() {
        let cfg = GenConfig { n_train: 50, n_test: 20, seed: 6, ..GenConfig::default() };
        let (train, test) = generate(&cfg).unwrap();
        let m = fit_network(&train, &NetworkParams { max_epochs: 100, ..Default::default() }, 6).unwrap();
        let pred = m.predict(&test.features()).unwrap();
        assert!(pred.iter().all(|v| v.is_finite()));
    }
}
