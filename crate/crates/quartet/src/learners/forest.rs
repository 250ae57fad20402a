//! Bagged random forest over the CART grower.
//!
//! Each member tree gets its own labeled substream (`forest/tree/{t}`) for
//! bootstrap draws and per-split feature sampling, so the fit is identical
//! under any thread count. Out-of-bag error is estimated for each row from
//! the trees whose bootstrap multiset excludes it.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::Matrix;
use crate::rng::Substream;

use super::tree::{grow_tree, predict_row, validate_nodes, GrowSpec, TreeNode};
use super::{Model, LABEL_FOREST};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; defaults to `max(1, p / 3)`.
    pub mtry: Option<usize>,
    /// Minimum node size eligible for splitting.
    pub min_node: usize,
    /// Debug switch: `false` trains every tree on the full sample.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, mtry: None, min_node: 5, bootstrap: true }
    }
}

/// A fitted forest: member trees plus their bootstrap index sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestFit {
    pub label: String,
    pub feature_names: Vec<String>,
    pub trees: Vec<Vec<TreeNode>>,
    /// Per-tree bootstrap draws, in draw order (length = n_train each).
    pub in_bag: Vec<Vec<u32>>,
    pub mtry: usize,
    pub min_node: usize,
    /// Out-of-bag MSE; `None` when no row is ever out of bag.
    pub oob_mse: Option<f64>,
    pub seed: u64,
}

impl ForestFit {
    pub(crate) fn predict_unchecked(&self, x: &Matrix) -> Vec<f64> {
        let n = x.nrows();
        let mut acc = vec![0.0; n];
        for tree in &self.trees {
            for (i, a) in acc.iter_mut().enumerate() {
                *a += predict_row(tree, x.row(i));
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    /// Prediction of a single member tree, for degenerate-forest checks.
    pub fn tree_prediction(&self, t: usize, x: &Matrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| predict_row(&self.trees[t], x.row(i))).collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Serde("forest has no trees".into()));
        }
        if self.in_bag.len() != self.trees.len() {
            return Err(Error::Serde("in_bag length differs from tree count".into()));
        }
        for t in &self.trees {
            validate_nodes(t, self.feature_names.len())?;
        }
        Ok(())
    }
}

/// Fit a random forest. Per-tree seeds derive from `seed`, so the result is
/// independent of scheduling.
pub fn fit_forest(train: &Dataset, params: &ForestParams, seed: u64) -> Result<Model> {
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::Config("need at least 2 rows".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    let p = train.n_features();
    let mtry = params.mtry.unwrap_or_else(|| (p / 3).max(1)).min(p);
    let x = train.features();
    let y = train.target();

    let grown: Vec<(Vec<TreeNode>, Vec<u32>)> = exec::map_indexed(params.n_trees, |t| {
        let mut rng = Substream::new(seed, &format!("forest/tree/{t}"));
        let bag: Vec<u32> = if params.bootstrap {
            (0..n).map(|_| rng.index(n) as u32).collect()
        } else {
            (0..n as u32).collect()
        };
        let spec = GrowSpec { max_depth: None, min_split: params.min_node, mtry: Some(mtry) };
        let nodes = grow_tree(&x, &y, &bag, &spec, Some(&mut rng));
        (nodes, bag)
    });

    let (trees, in_bag): (Vec<_>, Vec<_>) = grown.into_iter().unzip();
    let oob_mse = oob_mse(&trees, &in_bag, &x, &y);

    Ok(Model::Forest(ForestFit {
        label: LABEL_FOREST.to_string(),
        feature_names: train.feature_names().to_vec(),
        trees,
        in_bag,
        mtry,
        min_node: params.min_node,
        oob_mse,
        seed,
    }))
}

/// Mean squared error of out-of-bag predictions. For each row the prediction
/// averages only trees whose bootstrap excludes the row; rows in every bag
/// are left out of the error.
fn oob_mse(trees: &[Vec<TreeNode>], in_bag: &[Vec<u32>], x: &Matrix, y: &[f64]) -> Option<f64> {
    let n = x.nrows();
    let mut bag_flags = vec![false; trees.len() * n];
    for (t, bag) in in_bag.iter().enumerate() {
        for &i in bag {
            bag_flags[t * n + i as usize] = true;
        }
    }
    let mut sse = 0.0;
    let mut used = 0usize;
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (t, tree) in trees.iter().enumerate() {
            if !bag_flags[t * n + i] {
                sum += predict_row(tree, x.row(i));
                count += 1;
            }
        }
        if count > 0 {
            let err = y[i] - sum / count as f64;
            sse += err * err;
            used += 1;
        }
    }
    (used > 0).then(|| sse / used as f64)
}
