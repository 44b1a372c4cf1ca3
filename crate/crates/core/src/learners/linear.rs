//! Weighted linear classifiers trained by deterministic full-batch subgradient
//! descent with iterate averaging.
//!
//! One stepper serves every linear training path in the crate: ERM here, the
//! distributionally robust outer loops in [`crate::dro`]. The caller supplies a
//! closure producing the (loss, subgradient) pair at the current iterate; the
//! stepper handles the `1/√t` step schedule, the l2 term, Polyak averaging, and
//! best-iterate tracking. Because robust training at radius zero evaluates the
//! exact same closure arithmetic as ERM, the two trajectories coincide.

use serde::{Deserialize, Serialize};

use super::loss::{sigmoid, to_pm1, LossKind};
use crate::error::{Error, Result};
use crate::tabular::TabularDataset;

/// Linear decision function `score(x) = w·x + intercept`; class 1 iff score ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub loss_kind: LossKind,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coefficients.len());
        let mut s = self.intercept;
        for (w, v) in self.coefficients.iter().zip(x) {
            s += w * v;
        }
        s
    }
}

/// Knobs for the subgradient stepper.
///
/// `seed` is carried for interface uniformity with the stochastic learners; the
/// optimizer itself is deterministic full-batch and never draws from it.
/// `tolerance` controls early stopping: the loop halts after 250 consecutive
/// steps without an objective improvement of at least `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub step_size: f64,
    pub l2: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            step_size: 0.5,
            l2: 0.0,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be ≥ 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step_size", format!("{} not > 0", self.step_size)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("l2", format!("{} not ≥ 0", self.l2)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", format!("{} not > 0", self.tolerance)));
        }
        Ok(())
    }
}

/// Objective value and subgradient at an iterate, l2 term excluded (the stepper
/// adds it).
pub(crate) struct StepEval {
    pub objective: f64,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

/// Result of a descent run: parameters and the best total objective seen
/// (loss + l2 penalty).
pub(crate) struct DescentOutcome {
    pub w: Vec<f64>,
    pub b: f64,
    pub objective_total: f64,
}

const EARLY_STOP_PATIENCE: usize = 250;
const AVERAGE_EVERY: usize = 25;

/// Deterministic full-batch subgradient descent with `η_t = step_size/√(t+1)`,
/// returning the best iterate encountered among raw iterates and sampled Polyak
/// averages. The zero vector is the first candidate, so the returned objective
/// never exceeds the objective at zero.
pub(crate) fn descend<F>(d: usize, cfg: &TrainConfig, mut eval: F) -> Result<DescentOutcome>
where
    F: FnMut(&[f64], f64) -> StepEval,
{
    cfg.validate()?;
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut avg_w = vec![0.0f64; d];
    let mut avg_b = 0.0f64;

    let mut best_w = w.clone();
    let mut best_b = b;
    let mut best_total = f64::INFINITY;
    let mut last_improvement = 0usize;

    let l2 = cfg.l2;
    let penalty = |w: &[f64]| 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();

    for t in 0..cfg.steps {
        let e = eval(&w, b);
        let total = e.objective + penalty(&w);
        if total < best_total {
            if best_total - total >= cfg.tolerance {
                last_improvement = t;
            }
            best_total = total;
            best_w.copy_from_slice(&w);
            best_b = b;
        }
        if t - last_improvement >= EARLY_STOP_PATIENCE {
            break;
        }

        let eta = cfg.step_size / ((t + 1) as f64).sqrt();
        for j in 0..d {
            w[j] -= eta * (e.grad_w[j] + l2 * w[j]);
        }
        b -= eta * e.grad_b;

        // Running average of post-step iterates; periodically audition it.
        let k = (t + 1) as f64;
        for j in 0..d {
            avg_w[j] += (w[j] - avg_w[j]) / k;
        }
        avg_b += (b - avg_b) / k;
        if (t + 1) % AVERAGE_EVERY == 0 || t + 1 == cfg.steps {
            let ea = eval(&avg_w, avg_b);
            let ta = ea.objective + penalty(&avg_w);
            if ta < best_total {
                if best_total - ta >= cfg.tolerance {
                    last_improvement = t;
                }
                best_total = ta;
                best_w.copy_from_slice(&avg_w);
                best_b = avg_b;
            }
        }
    }
    Ok(DescentOutcome {
        w: best_w,
        b: best_b,
        objective_total: best_total,
    })
}

/// Precomputed view of a dataset for linear losses: ±1 labels and the base
/// weight distribution. Shared by ERM and the robust outer loops so that the
/// same weights produce bit-identical arithmetic.
pub(crate) struct LinearProblem<'a> {
    pub data: &'a TabularDataset,
    pub y_pm: Vec<f64>,
    pub base: Vec<f64>,
    pub loss: LossKind,
}

impl<'a> LinearProblem<'a> {
    pub fn new(data: &'a TabularDataset, loss: LossKind) -> Result<Self> {
        let has0 = data.labels().iter().any(|&y| y == 0);
        let has1 = data.labels().iter().any(|&y| y == 1);
        if !has0 || !has1 {
            return Err(Error::SingleClass);
        }
        Ok(LinearProblem {
            data,
            y_pm: data.labels().iter().map(|&y| to_pm1(y)).collect(),
            base: data.weight_distribution(),
            loss,
        })
    }

    pub fn scores(&self, w: &[f64], b: f64) -> Vec<f64> {
        (0..self.data.n())
            .map(|i| {
                let mut s = b;
                for (wj, v) in w.iter().zip(self.data.row(i)) {
                    s += wj * v;
                }
                s
            })
            .collect()
    }

    pub fn losses(&self, scores: &[f64]) -> Vec<f64> {
        scores
            .iter()
            .zip(&self.y_pm)
            .map(|(&s, &y)| self.loss.loss(y * s))
            .collect()
    }

    /// Weighted objective and subgradient under an arbitrary probability vector
    /// `q` over rows.
    pub fn weighted_eval(&self, q: &[f64], scores: &[f64], losses: &[f64]) -> StepEval {
        let d = self.data.d();
        let mut obj = 0.0;
        let mut grad_w = vec![0.0; d];
        let mut grad_b = 0.0;
        for i in 0..self.data.n() {
            let qi = q[i];
            if qi == 0.0 {
                continue;
            }
            obj += qi * losses[i];
            let g = self.loss.dscore(self.y_pm[i], scores[i]);
            if g != 0.0 {
                let gq = qi * g;
                for (gw, v) in grad_w.iter_mut().zip(self.data.row(i)) {
                    *gw += gq * v;
                }
                grad_b += gq;
            }
        }
        StepEval {
            objective: obj,
            grad_w,
            grad_b,
        }
    }
}

/// Fit a linear classifier minimising the weighted average loss plus
/// `l2/2·‖w‖²`. Requires both classes present.
pub fn fit_linear(data: &TabularDataset, loss: LossKind, cfg: &TrainConfig) -> Result<LinearModel> {
    let (model, _obj) = fit_linear_with_objective(data, loss, cfg)?;
    Ok(model)
}

/// Like [`fit_linear`] but also returns the achieved objective
/// (weighted loss + l2 penalty at the returned parameters).
pub fn fit_linear_with_objective(
    data: &TabularDataset,
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<(LinearModel, f64)> {
    let problem = LinearProblem::new(data, loss)?;
    let outcome = descend(data.d(), cfg, |w, b| {
        let scores = problem.scores(w, b);
        let losses = problem.losses(&scores);
        problem.weighted_eval(&problem.base, &scores, &losses)
    })?;
    Ok((
        LinearModel {
            coefficients: outcome.w,
            intercept: outcome.b,
            loss_kind: loss,
        },
        outcome.objective_total,
    ))
}

/// Weighted average loss (plus optional l2) of a linear model on a dataset —
/// the quantity `fit_linear` minimises.
pub fn linear_objective(
    data: &TabularDataset,
    model: &LinearModel,
    l2: f64,
) -> Result<f64> {
    let problem = LinearProblem::new(data, model.loss_kind)?;
    let scores = problem.scores(&model.coefficients, model.intercept);
    let losses = problem.losses(&scores);
    let obj: f64 = problem
        .base
        .iter()
        .zip(&losses)
        .map(|(&p, &l)| p * l)
        .sum();
    Ok(obj + 0.5 * l2 * model.coefficients.iter().map(|v| v * v).sum::<f64>())
}

/// Probability-like output for a linear model (logistic link on the score).
pub fn linear_prob(model: &LinearModel, x: &[f64]) -> f64 {
    sigmoid(model.score(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::TabularDataset;

    fn separable() -> TabularDataset {
        // Class by sign of x1; 40 points on a line.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let x = (i as f64 - 19.5) / 10.0;
            features.push(x);
            features.push(0.5);
            labels.push(u8::from(x > 0.0));
        }
        TabularDataset::with_unit_weights(features, labels, vec!["x1".into(), "x2".into()]).unwrap()
    }

    #[test]
    fn fits_a_separable_problem() {
        let data = separable();
        for loss in [LossKind::Hinge, LossKind::Logistic] {
            let model = fit_linear(&data, loss, &TrainConfig::default()).unwrap();
            let errors = (0..data.n())
                .filter(|&i| u8::from(model.score(data.row(i)) >= 0.0) != data.label(i))
                .count();
            assert_eq!(errors, 0, "{loss:?} should separate the data");
        }
    }

    #[test]
    fn objective_no_worse_than_zero_model() {
        let data = separable();
        let cfg = TrainConfig {
            steps: 50,
            ..TrainConfig::default()
        };
        let (model, obj) = fit_linear_with_objective(&data, LossKind::Hinge, &cfg).unwrap();
        let zero = LinearModel {
            coefficients: vec![0.0; 2],
            intercept: 0.0,
            loss_kind: LossKind::Hinge,
        };
        let zero_obj = linear_objective(&data, &zero, cfg.l2).unwrap();
        assert!(obj <= zero_obj + 1e-12, "{obj} vs {zero_obj}");
        let model_obj = linear_objective(&data, &model, cfg.l2).unwrap();
        assert!((model_obj - obj).abs() < 1e-12, "reported objective matches model");
    }

    #[test]
    fn weights_matter() {
        // Two clusters overlapping; upweighting the right cluster moves the boundary.
        let features = vec![-1.0, 0.0, -0.5, 0.0, 0.5, 0.0, 1.0, 0.0];
        let labels = vec![0, 1, 0, 1];
        let base = TabularDataset::with_unit_weights(
            features.clone(),
            labels.clone(),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let skewed = base.with_weights(vec![100.0, 1.0, 100.0, 1.0]).unwrap();
        let cfg = TrainConfig::default();
        let m1 = fit_linear(&base, LossKind::Logistic, &cfg).unwrap();
        let m2 = fit_linear(&skewed, LossKind::Logistic, &cfg).unwrap();
        // Heavily weighting the 0-labelled points pushes the intercept down.
        assert!(m2.intercept < m1.intercept);
    }

    #[test]
    fn single_class_errors() {
        let data = TabularDataset::with_unit_weights(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(
            fit_linear(&data, LossKind::Hinge, &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn config_validation() {
        let data = separable();
        for bad in [
            TrainConfig { steps: 0, ..TrainConfig::default() },
            TrainConfig { step_size: 0.0, ..TrainConfig::default() },
            TrainConfig { l2: -1.0, ..TrainConfig::default() },
            TrainConfig { tolerance: 0.0, ..TrainConfig::default() },
        ] {
            assert!(fit_linear(&data, LossKind::Hinge, &bad).is_err());
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let data = separable();
        let cfg = TrainConfig::default();
        let a = fit_linear(&data, LossKind::Hinge, &cfg).unwrap();
        let b = fit_linear(&data, LossKind::Hinge, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_json_round_trip() {
        let data = separable();
        let m = fit_linear(&data, LossKind::Logistic, &TrainConfig::default()).unwrap();
        let js = serde_json::to_string(&m).unwrap();
        let back: LinearModel = serde_json::from_str(&js).unwrap();
        assert_eq!(m, back);
    }
}
