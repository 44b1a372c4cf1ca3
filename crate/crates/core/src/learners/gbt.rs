//! Gradient-boosted trees: stagewise least-squares fitting of shallow CART
//! trees on residuals (identity link) or on the logistic gradient
//! (classification). Fitting is single-threaded per call; callers parallelise
//! across independent fits.

use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::tree::{fit_tree, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::tabular::TabularDataset;

/// Output link for a boosted ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GbtLink {
    /// Raw ensemble output is the prediction (regression).
    Identity,
    /// Raw output is a log-odds score; probability via the logistic function.
    Logistic,
}

/// A boosted ensemble: `raw(x) = base_score + learning_rate · Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GBTModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<DecisionTree>,
    pub link: GbtLink,
}

impl GBTModel {
    pub fn raw(&self, x: &[f64]) -> f64 {
        let mut s = self.base_score;
        for t in &self.trees {
            s += self.learning_rate * t.predict_value(x);
        }
        s
    }

    /// Probability of class 1 under the model's link (identity output is
    /// clamped to [0, 1]).
    pub fn prob(&self, x: &[f64]) -> f64 {
        match self.link {
            GbtLink::Identity => self.raw(x).clamp(0.0, 1.0),
            GbtLink::Logistic => sigmoid(self.raw(x)),
        }
    }

    pub fn predict_label(&self, x: &[f64]) -> u8 {
        u8::from(self.prob(x) >= 0.5)
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 5,
        }
    }
}

impl GbtConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("{} not in (0, 1]", self.learning_rate),
            ));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf", "must be ≥ 1"));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            min_gain_frac: 0.0,
        }
    }
}

/// Boosted regression on an arbitrary response. `base_score` is the weighted
/// mean response; with `rounds = 0` the model predicts it everywhere.
pub fn fit_gbt_regressor(
    data: &TabularDataset,
    response: &[f64],
    cfg: &GbtConfig,
) -> Result<GBTModel> {
    cfg.validate()?;
    let n = data.n();
    if response.len() != n {
        return Err(Error::LengthMismatch {
            context: "gbt response",
            expected: n,
            got: response.len(),
        });
    }
    let total_w = data.total_weight();
    let base: f64 = (0..n).map(|i| data.weight(i) * response[i]).sum::<f64>() / total_w;
    let mut raw: Vec<f64> = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let params = cfg.tree_params();
    let mut residual = vec![0.0; n];
    for _ in 0..cfg.rounds {
        for i in 0..n {
            residual[i] = response[i] - raw[i];
        }
        let tree = fit_tree(data, &residual, &params)?;
        for i in 0..n {
            raw[i] += cfg.learning_rate * tree.predict_value(data.row(i));
        }
        trees.push(tree);
    }
    Ok(GBTModel {
        base_score: base,
        learning_rate: cfg.learning_rate,
        trees,
        link: GbtLink::Identity,
    })
}

/// Boosted binary classifier on the dataset's labels: trees fit the logistic
/// gradient `y - σ(F)`; `base_score` is the weighted log-odds.
pub fn fit_gbt_classifier(data: &TabularDataset, cfg: &GbtConfig) -> Result<GBTModel> {
    cfg.validate()?;
    let n = data.n();
    let total_w = data.total_weight();
    let p_bar = ((0..n)
        .map(|i| data.weight(i) * f64::from(data.label(i)))
        .sum::<f64>()
        / total_w)
        .clamp(1e-6, 1.0 - 1e-6);
    let base = (p_bar / (1.0 - p_bar)).ln();
    let mut raw: Vec<f64> = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.rounds);
    let params = cfg.tree_params();
    let mut gradient = vec![0.0; n];
    for _ in 0..cfg.rounds {
        for i in 0..n {
            gradient[i] = f64::from(data.label(i)) - sigmoid(raw[i]);
        }
        let tree = fit_tree(data, &gradient, &params)?;
        for i in 0..n {
            raw[i] += cfg.learning_rate * tree.predict_value(data.row(i));
        }
        trees.push(tree);
    }
    Ok(GBTModel {
        base_score: base,
        learning_rate: cfg.learning_rate,
        trees,
        link: GbtLink::Logistic,
    })
}
