//! Shift diagnostics: relative regret, accuracy-gap decomposition, and the
//! split of a source→target performance drop into covariate-shift (X) and
//! conditional-shift (Y|X) terms.
//!
//! The decomposition compares the two conditional risk surfaces on a *shared*
//! covariate distribution `s(x) ∝ p(x)·q(x)/(p(x)+q(x))`, which concentrates
//! where both domains have density, so the Y|X term never extrapolates either
//! risk model off its support. Everything here reduces to three ingredients:
//!
//! 1. a domain classifier π̂(x) ≈ P(row came from target | x) fitted by
//!    gradient boosting on the pooled rows ([`fit_shared_weights`]);
//! 2. likelihood-ratio weights `w_P, w_Q` turning each domain's empirical
//!    measure into an estimate of expectations under `s`;
//! 3. boosted regressions `R̂_P, R̂_Q` of the model's pointwise 0-1 loss on the
//!    covariates within each domain ([`disde`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{
    accuracy, fit_gbt_classifier, fit_gbt_regressor, kfold_accuracy, GBTModel, GbtConfig,
    LearnerSpec, Predictor,
};
use crate::rng;
use crate::tabular::{DomainPair, TabularDataset};

/// Clip for the domain-classifier probability. Keeps the likelihood-ratio
/// weights bounded when the two covariate supports barely overlap.
const PI_CLIP: f64 = 1e-3;
/// Minimum target size for [`relative_regret`]: below this the k-fold
/// denominator is too noisy to normalize by.
const MIN_REGRET_ROWS: usize = 50;
/// Folds used to estimate the best-on-target loss in [`relative_regret`].
const REGRET_FOLDS: usize = 4;
/// Gaps smaller than this are treated as zero when forming `yx_ratio`.
const GAP_FLOOR: f64 = 1e-12;

/// A fitted domain classifier plus the likelihood-ratio weights that turn each
/// domain's rows into samples from the shared covariate distribution.
///
/// `w_source[i]` multiplies source row `i` when estimating a shared-distribution
/// expectation from the source sample, and symmetrically for `w_target`. The
/// weights are proportional likelihood ratios (the shared distribution's
/// normalizing constant is left free), so they are only meaningful inside
/// self-normalized weighted means.
#[derive(Debug, Clone)]
pub struct SharedWeights {
    /// Share of the pooled weight carried by the target domain, in (0, 1).
    pub alpha_hat: f64,
    /// Boosted classifier for P(came from target | x).
    pub pi_model: GBTModel,
    /// One non-negative weight per source row; at least one strictly positive.
    pub w_source: Vec<f64>,
    /// One non-negative weight per target row; at least one strictly positive.
    pub w_target: Vec<f64>,
}

impl SharedWeights {
    /// Clipped probability that a covariate row came from the target domain.
    pub fn pi_hat(&self, x: &[f64]) -> f64 {
        clip_pi(self.pi_model.prob(x))
    }

    /// `(w_P, w_Q)` likelihood-ratio weights at an arbitrary covariate point.
    pub fn weights_at(&self, x: &[f64]) -> (f64, f64) {
        weight_formulas(self.pi_hat(x), self.alpha_hat)
    }
}

fn clip_pi(pi: f64) -> f64 {
    pi.clamp(PI_CLIP, 1.0 - PI_CLIP)
}

/// `(w_P, w_Q)` from the classifier probability and the pooled target share:
/// `w_P = π / ((1−α)π + α(1−π))` and `w_Q = (1−π) / ((1−α)π + α(1−π))`.
pub(crate) fn weight_formulas(pi: f64, alpha: f64) -> (f64, f64) {
    let denom = (1.0 - alpha) * pi + alpha * (1.0 - pi);
    (pi / denom, (1.0 - pi) / denom)
}

/// The three-term decomposition of a performance gap. Terms I and III capture
/// covariate (X) shift; term II captures conditional (Y|X) shift measured on
/// the shared covariate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftDecomposition {
    /// Target loss minus source loss under the plug-in risk estimates.
    pub total_gap: f64,
    /// (I) source risk surface, moved from the source to the shared covariates.
    pub term_x_source: f64,
    /// (II) risk-surface swap (source→target conditional) on shared covariates.
    pub term_yx: f64,
    /// (III) target risk surface, moved from shared to target covariates.
    pub term_x_target: f64,
    /// `term_yx / total_gap`; `None` when `|total_gap| < 1e-12`.
    pub yx_ratio: Option<f64>,
}

impl ShiftDecomposition {
    /// Header of the one-row CSV rendering.
    pub const CSV_HEADER: &'static str = "total_gap,term_I,term_II,term_III,yx_ratio";

    /// The data row matching [`Self::CSV_HEADER`]. An undefined ratio becomes
    /// an empty field.
    pub fn csv_row(&self) -> String {
        let ratio = self.yx_ratio.map(|r| format!("{r}")).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.total_gap, self.term_x_source, self.term_yx, self.term_x_target, ratio
        )
    }

    /// Full CSV document: header line plus the single data row.
    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }

    /// Write the CSV rendering to `path`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Fit the shared-distribution machinery for a pair: a boosted domain
/// classifier on the pooled rows (label 1 = came from target), the pooled
/// target share `alpha_hat`, and the per-row likelihood-ratio weights.
///
/// `alpha_hat` is the target's share of total pooled weight, which reduces to
/// `n_Q / (n_P + n_Q)` for unit weights. Classifier probabilities are clipped
/// to `[1e-3, 1 − 1e-3]` so the weights stay finite even on disjoint supports.
pub fn fit_shared_weights(pair: &DomainPair, classifier_cfg: &GbtConfig) -> Result<SharedWeights> {
    let pooled = pool_domains(&pair.source, &pair.target)?;
    let alpha_hat = pair.target.total_weight() / pooled.total_weight();
    let pi_model = fit_gbt_classifier(&pooled, classifier_cfg)?;

    let weight = |data: &TabularDataset, i: usize| {
        weight_formulas(clip_pi(pi_model.prob(data.row(i))), alpha_hat)
    };
    let w_source = (0..pair.source.n())
        .map(|i| weight(&pair.source, i).0)
        .collect();
    let w_target = (0..pair.target.n())
        .map(|j| weight(&pair.target, j).1)
        .collect();
    Ok(SharedWeights {
        alpha_hat,
        pi_model,
        w_source,
        w_target,
    })
}

/// Stack the two domains into one dataset labelled by origin (0 = source,
/// 1 = target), keeping each row's weight.
fn pool_domains(source: &TabularDataset, target: &TabularDataset) -> Result<TabularDataset> {
    let d = source.d();
    let n = source.n() + target.n();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (data, origin) in [(source, 0u8), (target, 1u8)] {
        for i in 0..data.n() {
            features.extend_from_slice(data.row(i));
            labels.push(origin);
            weights.push(data.weight(i));
        }
    }
    TabularDataset::new(features, labels, weights, source.feature_names().to_vec())
}

/// Decompose the source→target gap in `model`'s 0-1 loss into X-shift terms
/// (I, III) and a Y|X-shift term (II), fitting fresh shared weights with
/// `classifier_cfg`.
///
/// `model` should be the source-trained classifier whose degradation is being
/// explained; its feature dimension must match the pair's. `risk_cfg` controls
/// the boosted regressions of pointwise loss on covariates within each domain.
pub fn disde(
    pair: &DomainPair,
    model: &dyn Predictor,
    classifier_cfg: &GbtConfig,
    risk_cfg: &GbtConfig,
) -> Result<ShiftDecomposition> {
    let shared = fit_shared_weights(pair, classifier_cfg)?;
    disde_with_weights(pair, model, &shared, risk_cfg)
}

/// [`disde`] with precomputed shared weights, so several models can be
/// decomposed against one fitted domain classifier (or the weights reused
/// across a source/target swap).
pub fn disde_with_weights(
    pair: &DomainPair,
    model: &dyn Predictor,
    shared: &SharedWeights,
    risk_cfg: &GbtConfig,
) -> Result<ShiftDecomposition> {
    if shared.w_source.len() != pair.source.n() {
        return Err(Error::LengthMismatch {
            context: "shared source weights",
            expected: pair.source.n(),
            got: shared.w_source.len(),
        });
    }
    if shared.w_target.len() != pair.target.n() {
        return Err(Error::LengthMismatch {
            context: "shared target weights",
            expected: pair.target.n(),
            got: shared.w_target.len(),
        });
    }

    let loss_source = zero_one_losses(model, &pair.source);
    let loss_target = zero_one_losses(model, &pair.target);
    let risk_source = fit_gbt_regressor(&pair.source, &loss_source, risk_cfg)?;
    let risk_target = fit_gbt_regressor(&pair.target, &loss_target, risk_cfg)?;

    // Four plug-in expectations of the two risk surfaces: each domain under its
    // own covariates, and both under the shared distribution.
    let e_p = domain_mean(&pair.source, |x| risk_source.raw(x));
    let e_q = domain_mean(&pair.target, |x| risk_target.raw(x));
    let e_s_source_risk = shared_mean(pair, shared, |x| risk_source.raw(x));
    let e_s_target_risk = shared_mean(pair, shared, |x| risk_target.raw(x));

    let total_gap = e_q - e_p;
    let term_x_source = e_s_source_risk - e_p;
    let term_yx = e_s_target_risk - e_s_source_risk;
    let term_x_target = e_q - e_s_target_risk;
    let yx_ratio = (total_gap.abs() >= GAP_FLOOR).then(|| term_yx / total_gap);
    Ok(ShiftDecomposition {
        total_gap,
        term_x_source,
        term_yx,
        term_x_target,
        yx_ratio,
    })
}

fn zero_one_losses(model: &dyn Predictor, data: &TabularDataset) -> Vec<f64> {
    (0..data.n())
        .map(|i| f64::from(model.predict(data.row(i)) != data.label(i)))
        .collect()
}

/// Self-normalized weighted mean of `g` under one domain's own weights.
fn domain_mean(data: &TabularDataset, g: impl Fn(&[f64]) -> f64) -> f64 {
    let num: f64 = (0..data.n()).map(|i| data.weight(i) * g(data.row(i))).sum();
    num / data.total_weight()
}

/// Self-normalized estimate of `E_S[g]` pooling both domains.
///
/// Source rows enter with multiplier `(1−α̂)·b_i·w_P(x_i)` and target rows with
/// `α̂·b_j·w_Q(x_j)`, where `b` is the row's share of its own domain's weight.
/// Both products estimate the *same* unnormalized shared density, so pooling is
/// consistent, the decomposition telescopes exactly, and swapping the domains
/// (with the roles of the weight vectors swapped) re-estimates the same value.
fn shared_mean(pair: &DomainPair, shared: &SharedWeights, g: impl Fn(&[f64]) -> f64) -> f64 {
    let alpha = shared.alpha_hat;
    let source_total = pair.source.total_weight();
    let target_total = pair.target.total_weight();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..pair.source.n() {
        let m = (1.0 - alpha) * (pair.source.weight(i) / source_total) * shared.w_source[i];
        num += m * g(pair.source.row(i));
        den += m;
    }
    for j in 0..pair.target.n() {
        let m = alpha * (pair.target.weight(j) / target_total) * shared.w_target[j];
        num += m * g(pair.target.row(j));
        den += m;
    }
    num / den
}

/// Relative regret of transferring: the target loss of a source-trained model,
/// divided by the best achievable target loss within the same learner class
/// (estimated by 4-fold fitting on the target), minus one.
///
/// Returns `+∞` when the target is perfectly learnable in-class (denominator
/// ≤ 1e-12). Small negative values can occur when the k-fold estimate is
/// pessimistic about the best target model.
pub fn relative_regret(pair: &DomainPair, learner_spec: &LearnerSpec, seed: u64) -> Result<f64> {
    if pair.target.n() < MIN_REGRET_ROWS {
        return Err(Error::TooFewRows {
            context: "relative_regret target",
            needed: MIN_REGRET_ROWS,
            got: pair.target.n(),
        });
    }
    let transferred = learner_spec.fit(&pair.source, rng::derive(seed, 1))?;
    let transferred_loss = 1.0 - accuracy(&transferred, &pair.target);
    let best_loss =
        1.0 - kfold_accuracy(&pair.target, REGRET_FOLDS, learner_spec, rng::derive(seed, 2))?;
    if best_loss <= GAP_FLOOR {
        return Ok(f64::INFINITY);
    }
    Ok(transferred_loss / best_loss - 1.0)
}

/// Evaluate one model on both domains: `(source_acc, gap, target_acc)` with
/// `gap = target_acc − source_acc`, so `source_acc + gap` rebuilds
/// `target_acc` up to a single rounding. The model's feature dimension must
/// match the pair's.
pub fn accuracy_decomposition(pair: &DomainPair, model: &dyn Predictor) -> (f64, f64, f64) {
    let source_acc = accuracy(model, &pair.source);
    let target_acc = accuracy(model, &pair.target);
    (source_acc, target_acc - source_acc, target_acc)
}
