//! Weighted evaluation metrics and k-fold accuracy estimation.

use serde::{Deserialize, Serialize};

use super::loss::{to_pm1, LossKind};
use super::{FittedModel, LearnerSpec, Predictor};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng;
use crate::tabular::TabularDataset;

/// What [`evaluate`] computes. The first three are losses (lower is better);
/// `MacroF1` is a score in [0, 1] (higher is better).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    ZeroOne,
    Hinge,
    Logistic,
    MacroF1,
}

/// Weighted metric of a model on a dataset. Expectations are self-normalised
/// by the total weight, so rescaling all weights by a positive constant leaves
/// every metric unchanged.
pub fn evaluate(model: &dyn Predictor, data: &TabularDataset, metric: EvalMetric) -> f64 {
    let total = data.total_weight();
    match metric {
        EvalMetric::ZeroOne => {
            let mut wrong = 0.0;
            for i in 0..data.n() {
                if model.predict(data.row(i)) != data.label(i) {
                    wrong += data.weight(i);
                }
            }
            wrong / total
        }
        EvalMetric::Hinge | EvalMetric::Logistic => {
            let loss = if metric == EvalMetric::Hinge {
                LossKind::Hinge
            } else {
                LossKind::Logistic
            };
            let mut acc = 0.0;
            for i in 0..data.n() {
                let m = to_pm1(data.label(i)) * model.raw_score(data.row(i));
                acc += data.weight(i) * loss.loss(m);
            }
            acc / total
        }
        EvalMetric::MacroF1 => macro_f1(model, data),
    }
}

/// Weighted accuracy, `1 - zero_one loss`.
pub fn accuracy(model: &dyn Predictor, data: &TabularDataset) -> f64 {
    1.0 - evaluate(model, data, EvalMetric::ZeroOne)
}

/// Weight-aware macro-averaged F1 over the two classes. A class with zero true
/// positives contributes F1 = 0 (so "predict everything as class 1" on balanced
/// data scores ≈ 1/3, not 1/2).
fn macro_f1(model: &dyn Predictor, data: &TabularDataset) -> f64 {
    // Confusion entries accumulate weights, not counts.
    let mut tp = [0.0f64; 2];
    let mut fp = [0.0f64; 2];
    let mut fn_ = [0.0f64; 2];
    for i in 0..data.n() {
        let w = data.weight(i);
        let y = data.label(i) as usize;
        let p = model.predict(data.row(i)) as usize;
        if p == y {
            tp[y] += w;
        } else {
            fp[p] += w;
            fn_[y] += w;
        }
    }
    let f1 = |c: usize| -> f64 {
        let denom = 2.0 * tp[c] + fp[c] + fn_[c];
        if denom > 0.0 {
            2.0 * tp[c] / denom
        } else {
            0.0
        }
    };
    0.5 * (f1(0) + f1(1))
}

/// Mean weighted accuracy over `k` held-out folds, training a fresh model per
/// fold from `spec`. The shuffle and any learner randomness derive from `seed`.
///
/// Requires `2 ≤ k ≤` the number of rows with strictly positive weight; rows
/// with positive weight are spread round-robin over folds so every fold can be
/// scored.
pub fn kfold_accuracy(
    data: &TabularDataset,
    k: usize,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<f64> {
    let positive: Vec<usize> = (0..data.n()).filter(|&i| data.weight(i) > 0.0).collect();
    if k < 2 || k > positive.len() {
        return Err(Error::BadFold {
            k,
            usable: positive.len(),
        });
    }
    let zero: Vec<usize> = (0..data.n()).filter(|&i| data.weight(i) == 0.0).collect();

    use rand::seq::SliceRandom;
    let mut g = rng::rng(seed);
    let mut pos = positive;
    pos.shuffle(&mut g);
    let mut zer = zero;
    zer.shuffle(&mut g);

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos_idx, &row) in pos.iter().chain(zer.iter()).enumerate() {
        folds[pos_idx % k].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }

    let fold_refs: Vec<usize> = (0..k).collect();
    let results: Vec<Result<f64>> = exec::par_map(&fold_refs, |&f| {
        let test_rows = &folds[f];
        let train_rows: Vec<usize> = (0..k)
            .filter(|&g_| g_ != f)
            .flat_map(|g_| folds[g_].iter().copied())
            .collect();
        let mut train_rows = train_rows;
        train_rows.sort_unstable();
        let train = data.subset(&train_rows)?;
        let test = data.subset(test_rows)?;
        let model = spec.fit(&train, rng::derive(seed, 1 + f as u64))?;
        Ok(accuracy(&model, &test))
    });
    let mut sum = 0.0;
    for r in results {
        sum += r?;
    }
    Ok(sum / k as f64)
}

impl Predictor for FittedModel {
    fn raw_score(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Linear(m) => m.score(x),
            FittedModel::Tree(t) => t.predict_value(x),
            FittedModel::Gbt(g) => g.raw(x),
        }
    }

    fn prob(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Linear(m) => super::linear::linear_prob(m, x),
            FittedModel::Tree(t) => t.predict_value(x).clamp(0.0, 1.0),
            FittedModel::Gbt(g) => g.prob(x),
        }
    }

    fn predict(&self, x: &[f64]) -> u8 {
        match self {
            FittedModel::Linear(m) => u8::from(m.score(x) >= 0.0),
            FittedModel::Tree(t) => u8::from(t.predict_value(x) >= 0.5),
            FittedModel::Gbt(g) => g.predict_label(x),
        }
    }
}
