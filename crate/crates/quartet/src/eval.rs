//! Test-set performance metrics for a set of fitted models.

use std::fmt::Write as _;

use crate::data::{fmt_full, Dataset};
use crate::error::{Error, Result};
use crate::learners::Model;

/// Per-model metrics on one test set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub rmse: f64,
    pub mse: f64,
}

/// Performance of several models on one test set, in input order.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerfReport {
    pub models: Vec<(String, Metrics)>,
    pub n_test: usize,
}

impl PerfReport {
    pub fn get(&self, label: &str) -> Option<&Metrics> {
        self.models.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    /// `max - min` of the models' R².
    pub fn r2_spread(&self) -> f64 {
        let r2s: Vec<f64> = self.models.iter().map(|(_, m)| m.r2).collect();
        let max = r2s.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = r2s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        max - min
    }

    /// JSON document with all values at 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\"models\":{");
        for (i, (label, m)) in self.models.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(
                out,
                "{}:{{\"r2\":{},\"rmse\":{},\"mse\":{}}}",
                serde_json::to_string(label).unwrap(),
                fmt_full(m.r2),
                fmt_full(m.rmse),
                fmt_full(m.mse)
            );
        }
        let _ = write!(out, "}},\"n_test\":{}}}", self.n_test);
        out
    }
}

/// Mean squared error of predictions against targets.
pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(pred.len(), y.len());
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

pub fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    mse(pred, y).sqrt()
}

/// Population variance (1/n) of a slice.
fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Evaluate models on a test set: `r2 = 1 - mse / var(y_test)` with the
/// test-set mean as baseline.
pub fn evaluate(models: &[&Model], test: &Dataset) -> Result<PerfReport> {
    if test.n_rows() == 0 {
        return Err(Error::Eval("empty test set".into()));
    }
    let y = test.target();
    let var = variance(&y);
    if var == 0.0 {
        return Err(Error::Eval("zero-variance test target makes r2 undefined".into()));
    }
    let x = test.features();
    let mut out = Vec::with_capacity(models.len());
    for m in models {
        let pred = m.predict(&x)?;
        let e = mse(&pred, &y);
        out.push((m.label().to_string(), Metrics { r2: 1.0 - e / var, rmse: e.sqrt(), mse: e }));
    }
    Ok(PerfReport { models: out, n_test: test.n_rows() })
}
