//! Weighted learners over tabular data: linear models, CART trees, gradient
//! boosting, plus shared evaluation and k-fold machinery.

mod eval;
mod gbt;
mod linear;
mod loss;
mod tree;

pub use eval::{accuracy, evaluate, kfold_accuracy, EvalMetric};
pub use gbt::{fit_gbt_classifier, fit_gbt_regressor, GBTModel, GbtConfig, GbtLink};
pub use linear::{
    fit_linear, fit_linear_with_objective, linear_objective, linear_prob, LinearModel,
    TrainConfig,
};
pub use loss::{sigmoid, softplus, to_pm1, LossKind};
pub use tree::{fit_tree, DecisionTree, LeafCell, TreeNode, TreeParams};

pub(crate) use linear::{descend, LinearProblem, StepEval};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tabular::TabularDataset;

/// Anything that can score a feature row.
pub trait Predictor: Sync {
    /// Raw decision score: `w·x + b` for linear models, the ensemble/leaf value
    /// for trees (log-odds for logistic-link GBTs).
    fn raw_score(&self, x: &[f64]) -> f64;
    /// Probability of class 1.
    fn prob(&self, x: &[f64]) -> f64;
    /// Hard label in `{0, 1}`.
    fn predict(&self, x: &[f64]) -> u8;
}

impl Predictor for LinearModel {
    fn raw_score(&self, x: &[f64]) -> f64 {
        self.score(x)
    }
    fn prob(&self, x: &[f64]) -> f64 {
        linear_prob(self, x)
    }
    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

impl Predictor for DecisionTree {
    fn raw_score(&self, x: &[f64]) -> f64 {
        self.predict_value(x)
    }
    fn prob(&self, x: &[f64]) -> f64 {
        self.predict_value(x).clamp(0.0, 1.0)
    }
    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_value(x) >= 0.5)
    }
}

impl Predictor for GBTModel {
    fn raw_score(&self, x: &[f64]) -> f64 {
        self.raw(x)
    }
    fn prob(&self, x: &[f64]) -> f64 {
        GBTModel::prob(self, x)
    }
    fn predict(&self, x: &[f64]) -> u8 {
        self.predict_label(x)
    }
}

/// A learner recipe: enough to train a fresh classifier on any dataset.
/// Used by k-fold, the worst-case studies, and the grid harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Linear { loss: LossKind, cfg: TrainConfig },
    Tree { max_depth: usize, min_leaf: usize },
    Gbt(GbtConfig),
}

/// A trained classifier from a [`LearnerSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Tree(DecisionTree),
    Gbt(GBTModel),
}

impl LearnerSpec {
    /// Train on `data`. `seed` is threaded for interface uniformity; the
    /// current learners are deterministic given the data and their config.
    pub fn fit(&self, data: &TabularDataset, seed: u64) -> Result<FittedModel> {
        match self {
            LearnerSpec::Linear { loss, cfg } => {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                Ok(FittedModel::Linear(fit_linear(data, *loss, &cfg)?))
            }
            LearnerSpec::Tree { max_depth, min_leaf } => {
                let response: Vec<f64> = data.labels().iter().map(|&y| f64::from(y)).collect();
                let params = TreeParams {
                    max_depth: *max_depth,
                    min_leaf: *min_leaf,
                    min_gain_frac: 0.0,
                };
                Ok(FittedModel::Tree(fit_tree(data, &response, &params)?))
            }
            LearnerSpec::Gbt(cfg) => Ok(FittedModel::Gbt(fit_gbt_classifier(data, cfg)?)),
        }
    }

    /// Short class tag for reports.
    pub fn class_name(&self) -> &'static str {
        match self {
            LearnerSpec::Linear { .. } => "linear",
            LearnerSpec::Tree { .. } => "tree",
            LearnerSpec::Gbt(_) => "gbt",
        }
    }
}
