//! Four regression learners behind one prediction interface.
//!
//! The quartet families are a linear model, a depth-limited regression tree,
//! a bagged random forest, and a two-hidden-layer network trained with
//! resilient backpropagation. Fitted models are immutable, deterministic
//! given `(data, hyperparameters, seed)`, and serialize to a versioned JSON
//! document that round-trips predictions exactly.

mod forest;
mod linear;
mod network;
mod tree;

pub use forest::{fit_forest, ForestFit, ForestParams};
pub use linear::{fit_linear, fit_linear_normal_equations, LinearFit};
pub use network::{fit_network, network_gradient, network_loss, NetworkFit, NetworkParams};
pub use tree::{fit_tree, TreeFit, TreeNode, TreeParams};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const LABEL_LINEAR: &str = "linear regression";
pub const LABEL_TREE: &str = "decision tree";
pub const LABEL_FOREST: &str = "random forest";
pub const LABEL_NETWORK: &str = "neural network";

/// Current on-disk model document version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Anything that predicts a numeric target from a feature matrix.
pub trait Predictor {
    fn label(&self) -> &str;
    fn n_features(&self) -> usize;
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

/// A fitted model of one of the four families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearFit),
    Tree(TreeFit),
    Forest(ForestFit),
    Network(NetworkFit),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: Model,
}

impl Model {
    pub fn family(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Tree(_) => "tree",
            Model::Forest(_) => "forest",
            Model::Network(_) => "network",
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Model::Linear(f) => &f.label,
            Model::Tree(f) => &f.label,
            Model::Forest(f) => &f.label,
            Model::Network(f) => &f.label,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Linear(f) => &f.feature_names,
            Model::Tree(f) => &f.feature_names,
            Model::Forest(f) => &f.feature_names,
            Model::Network(f) => &f.feature_names,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names().len()
    }

    /// Predict one value per row of `x`. Pure; checks the schema width.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Schema(format!(
                "model '{}' expects {} features, got {}",
                self.label(),
                self.n_features(),
                x.ncols()
            )));
        }
        Ok(match self {
            Model::Linear(f) => f.predict_unchecked(x),
            Model::Tree(f) => f.predict_unchecked(x),
            Model::Forest(f) => f.predict_unchecked(x),
            Model::Network(f) => f.predict_unchecked(x),
        })
    }

    /// Structural sanity checks used after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Linear(f) => f.validate(),
            Model::Tree(f) => f.validate(),
            Model::Forest(f) => f.validate(),
            Model::Network(f) => f.validate(),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument { format_version: MODEL_FORMAT_VERSION, model: self.clone() };
        serde_json::to_string(&doc).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        doc.model.validate()?;
        Ok(doc.model)
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json())
            .map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

impl Predictor for Model {
    fn label(&self) -> &str {
        Model::label(self)
    }

    fn n_features(&self) -> usize {
        Model::n_features(self)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Model::predict(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GenConfig};

    #[test]
    fn json_roundtrip_reproduces_predictions() {
        let cfg = GenConfig { n_train: 300, n_test: 50, ..GenConfig::default() };
        let (train, test) = generate(&cfg).unwrap();
        let x = test.features();
        let models = vec![
            fit_linear(&train).unwrap(),
            fit_tree(&train, &TreeParams::default()).unwrap(),
            fit_forest(&train, &ForestParams { n_trees: 5, ..ForestParams::default() }, 7)
                .unwrap(),
            fit_network(
                &train,
                &NetworkParams { max_epochs: 50, ..NetworkParams::default() },
                7,
            )
            .unwrap(),
        ];
        for m in models {
            let json = m.to_json();
            let back = Model::from_json(&json).unwrap();
            let a = m.predict(&x).unwrap();
            let b = back.predict(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-15, "{} vs {}", u, v);
            }
            assert_eq!(m.label(), back.label());
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let cfg = GenConfig { n_train: 100, n_test: 10, ..GenConfig::default() };
        let (train, _) = generate(&cfg).unwrap();
        let m = fit_linear(&train).unwrap();
        let bad = Matrix::zeros(4, 2);
        assert!(matches!(m.predict(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn unknown_format_version_is_rejected() {
        let cfg = GenConfig { n_train: 50, n_test: 10, ..GenConfig::default() };
        let (train, _) = generate(&cfg).unwrap();
        let m = fit_linear(&train).unwrap();
        let json = m.to_json().replace("\"format_version\":1", "\"format_version\":99");
        assert!(Model::from_json(&json).is_err());
    }
}
