//! Greedy variance-reduction regression trees (CART style).
//!
//! Splits minimize the summed child SSE, with thresholds at midpoints
//! between sorted distinct values. Ties in the split search resolve to the
//! lowest feature index, then the lowest threshold, so refits are
//! deterministic. The same grower drives both the standalone depth-limited
//! tree and the forest's unlimited-depth member trees (which subsample
//! `mtry` candidate features per split).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Substream;

use super::{Model, LABEL_TREE};

/// Arena node of a fitted binary regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal { feature: usize, threshold: f64, left: usize, right: usize, n: usize },
    Leaf { prediction: f64, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum node size eligible for splitting.
    pub min_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 3, min_split: 250 }
    }
}

/// A fitted depth-limited regression tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFit {
    pub label: String,
    pub feature_names: Vec<String>,
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub min_split: usize,
}

impl TreeFit {
    pub(crate) fn predict_unchecked(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| predict_row(&self.nodes, x.row(i))).collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        validate_nodes(&self.nodes, self.feature_names.len())
    }

    /// Feature indices used by internal nodes, deduplicated, ascending.
    pub fn split_features(&self) -> Vec<usize> {
        let mut fs: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Internal { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .collect();
        fs.sort_unstable();
        fs.dedup();
        fs
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        if self.nodes.is_empty() { 0 } else { go(&self.nodes, 0) }
    }
}

pub(crate) fn predict_row(nodes: &[TreeNode], row: &[f64]) -> f64 {
    let mut i = 0;
    loop {
        match &nodes[i] {
            TreeNode::Leaf { prediction, .. } => return *prediction,
            TreeNode::Internal { feature, threshold, left, right, .. } => {
                i = if row[*feature] <= *threshold { *left } else { *right };
            }
        }
    }
}

pub(crate) fn validate_nodes(nodes: &[TreeNode], p: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::Serde("tree has no nodes".into()));
    }
    for node in nodes {
        if let TreeNode::Internal { feature, left, right, .. } = node {
            if *feature >= p || *left >= nodes.len() || *right >= nodes.len() {
                return Err(Error::Serde("tree node indices out of range".into()));
            }
        }
    }
    Ok(())
}

/// Growth limits for one tree.
pub(crate) struct GrowSpec {
    pub max_depth: Option<usize>,
    pub min_split: usize,
    /// Candidate features sampled per split; `None` tries all.
    pub mtry: Option<usize>,
}

/// Grow a tree over the rows `rows` of `(x, y)`.
///
/// `rng` is consumed only when `mtry` is set (one draw of candidate features
/// per split attempt).
pub(crate) fn grow_tree(
    x: &Matrix,
    y: &[f64],
    rows: &[u32],
    spec: &GrowSpec,
    mut rng: Option<&mut Substream>,
) -> Vec<TreeNode> {
    let mut nodes = Vec::new();
    let mut pool = Vec::new();
    let mut scratch: Vec<u32> = rows.to_vec();
    build(x, y, &mut scratch, 0, spec, &mut rng, &mut nodes, &mut pool);
    nodes
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[allow(clippy::too_many_arguments)]
fn build(
    x: &Matrix,
    y: &[f64],
    rows: &mut [u32],
    depth: usize,
    spec: &GrowSpec,
    rng: &mut Option<&mut Substream>,
    nodes: &mut Vec<TreeNode>,
    pool: &mut Vec<usize>,
) -> usize {
    let n = rows.len();
    let sum: f64 = rows.iter().map(|&r| y[r as usize]).sum();
    let mean = sum / n as f64;

    let depth_ok = spec.max_depth.map_or(true, |d| depth < d);
    let size_ok = n >= spec.min_split && n >= 2;
    let (ymin, ymax) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
        (lo.min(y[r as usize]), hi.max(y[r as usize]))
    });
    let pure = ymin == ymax;

    if !depth_ok || !size_ok || pure {
        nodes.push(TreeNode::Leaf { prediction: mean, n });
        return nodes.len() - 1;
    }

    let p = x.ncols();
    let candidates: Vec<usize> = match (spec.mtry, rng.as_deref_mut()) {
        (Some(k), Some(r)) if k < p => r.sample_indices(p, k, pool),
        (Some(k), None) if k < p => unreachable!("mtry without rng"),
        _ => (0..p).collect(),
    };

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<u32> = rows.to_vec();
    for &feat in &candidates {
        order.copy_from_slice(rows);
        order.sort_unstable_by(|&a, &b| {
            x.get(a as usize, feat)
                .total_cmp(&x.get(b as usize, feat))
                .then(a.cmp(&b))
        });
        let mut left_sum = 0.0;
        let mut prev = x.get(order[0] as usize, feat);
        for k in 1..n {
            left_sum += y[order[k - 1] as usize];
            let cur = x.get(order[k] as usize, feat);
            if cur > prev {
                let nl = k as f64;
                let nr = (n - k) as f64;
                let right_sum = sum - left_sum;
                let gain =
                    left_sum * left_sum / nl + right_sum * right_sum / nr - sum * sum / n as f64;
                if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit { gain, feature: feat, threshold: prev + (cur - prev) / 2.0 });
                }
            }
            prev = cur;
        }
    }

    let Some(split) = best else {
        nodes.push(TreeNode::Leaf { prediction: mean, n });
        return nodes.len() - 1;
    };

    // Partition preserving relative order on both sides.
    let (mut lhs, mut rhs): (Vec<u32>, Vec<u32>) = (Vec::new(), Vec::new());
    for &r in rows.iter() {
        if x.get(r as usize, split.feature) <= split.threshold {
            lhs.push(r);
        } else {
            rhs.push(r);
        }
    }
    debug_assert!(!lhs.is_empty() && !rhs.is_empty());

    let me = nodes.len();
    nodes.push(TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
        n,
    });
    let li = build(x, y, &mut lhs, depth + 1, spec, rng, nodes, pool);
    let ri = build(x, y, &mut rhs, depth + 1, spec, rng, nodes, pool);
    if let TreeNode::Internal { left, right, .. } = &mut nodes[me] {
        *left = li;
        *right = ri;
    }
    me
}

/// Fit a depth-limited variance-reduction tree.
pub fn fit_tree(train: &Dataset, params: &TreeParams) -> Result<Model> {
    if train.n_rows() == 0 {
        return Err(Error::Config("empty training set".into()));
    }
    let x = train.features();
    let y = train.target();
    let rows: Vec<u32> = (0..train.n_rows() as u32).collect();
    let spec = GrowSpec {
        max_depth: Some(params.max_depth),
        min_split: params.min_split,
        mtry: None,
    };
    let nodes = grow_tree(&x, &y, &rows, &spec, None);
    Ok(Model::Tree(TreeFit {
        label: LABEL_TREE.to_string(),
        feature_names: train.feature_names().to_vec(),
        nodes,
        max_depth: params.max_depth,
        min_split: params.min_split,
    }))
}
