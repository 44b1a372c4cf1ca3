//! Worst-case distribution lab: pull the adversarial reweighting out of an
//! f-divergence ambiguity set at a trained model, then measure what that
//! distribution is like — how well *any* model of a class could do on it
//! in-distribution, and how well a model refit on it transfers elsewhere.
//!
//! Only the f-divergence kinds (KL, χ², TV, CVaR) are supported: their worst
//! case is a reweighting of the observed rows, so the downstream refits need
//! no synthetic samples. A transport-cost worst case would perturb the
//! covariates themselves and is out of scope.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dro::{inner_worst_case, AmbiguitySpec, WorstCaseWeights};
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::{
    accuracy, kfold_accuracy, FittedModel, LearnerSpec, LinearModel, LossKind, TrainConfig,
};
use crate::rng;
use crate::tabular::TabularDataset;

/// Folds used when scoring the worst-case distribution in-distribution.
const STUDY_FOLDS: usize = 4;

/// A full worst-case study: the robust model, the adversarial reweighting
/// extracted at it, and the two summary measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseStudy {
    pub spec: AmbiguitySpec,
    pub model: LinearModel,
    pub weights: WorstCaseWeights,
    /// 4-fold accuracy of the learner class on the reweighted source.
    pub optimal_iid_acc: f64,
    /// Target index → 0-1 accuracy of the refit-on-worst-case model.
    pub transfer_acc: BTreeMap<usize, f64>,
}

impl WorstCaseStudy {
    /// Header of the long-format CSV rendering (one row per target).
    pub const CSV_HEADER: &'static str = "kind,radius,target_id,transfer_acc";

    /// Long-format CSV: one row per target, carrying the study's kind and
    /// radius so sweeps concatenate into one table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (id, acc) in &self.transfer_acc {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.spec.kind.as_str(),
                self.spec.radius,
                id,
                acc
            ));
        }
        out
    }

    /// Write the CSV rendering to `path`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// How a model is refit on the worst-case distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitMode {
    /// Carry the worst-case weights into training directly (deterministic,
    /// variance-free; the default everywhere).
    Weights,
    /// Draw `n` rows with replacement from the worst-case distribution and
    /// fit on the resample with unit weights. Kept for parity checks.
    Resample,
}

/// Extract the loss-maximizing reweighting of `data` for an f-divergence
/// ambiguity set, evaluated at `model`'s per-row hinge training losses.
///
/// The model should be the one trained under the matching DRO kind, but any
/// linear model of the right dimension is accepted. Errors on transport-cost
/// kinds, whose worst case is not a reweighting of observed rows.
pub fn extract_worst_case(
    data: &TabularDataset,
    model: &LinearModel,
    spec: &AmbiguitySpec,
) -> Result<WorstCaseWeights> {
    if model.coefficients.len() != data.d() {
        return Err(Error::LengthMismatch {
            context: "worst-case model coefficients",
            expected: data.d(),
            got: model.coefficients.len(),
        });
    }
    let losses = hinge_losses(model, data);
    let base = data.weight_distribution();
    inner_worst_case(&losses, &base, spec)
}

fn hinge_losses(model: &LinearModel, data: &TabularDataset) -> Vec<f64> {
    (0..data.n())
        .map(|i| {
            let y_pm = f64::from(data.label(i)) * 2.0 - 1.0;
            LossKind::Hinge.loss(y_pm * model.score(data.row(i)))
        })
        .collect()
}

/// The best accuracy a fresh model of `learner_spec`'s class can reach *on*
/// the worst-case distribution: 4-fold accuracy on `data` carrying the
/// worst-case weights, which enter both fitting and scoring.
///
/// Invariant to rescaling all weights by a positive constant. Degenerate
/// weightings (fewer than 4 rows with positive weight) propagate the k-fold
/// guard error.
pub fn optimal_iid_accuracy(
    weights: &WorstCaseWeights,
    data: &TabularDataset,
    learner_spec: &LearnerSpec,
    seed: u64,
) -> Result<f64> {
    let reweighted = data.with_weights(weights.weights.clone())?;
    kfold_accuracy(&reweighted, STUDY_FOLDS, learner_spec, seed)
}

/// Refit a model of `learner_spec`'s class on the worst-case distribution,
/// either by carrying the weights into training or by resampling rows.
pub fn refit_on_worst_case(
    weights: &WorstCaseWeights,
    source: &TabularDataset,
    learner_spec: &LearnerSpec,
    mode: RefitMode,
    seed: u64,
) -> Result<FittedModel> {
    let train = match mode {
        RefitMode::Weights => source.with_weights(weights.weights.clone())?,
        RefitMode::Resample => resample(weights, source, rng::derive(seed, 0x5EED))?,
    };
    learner_spec.fit(&train, seed)
}

/// `n` rows drawn with replacement from the worst-case distribution, with
/// unit weights.
fn resample(
    weights: &WorstCaseWeights,
    source: &TabularDataset,
    seed: u64,
) -> Result<TabularDataset> {
    use rand::distributions::{Distribution, WeightedIndex};
    let dist = WeightedIndex::new(&weights.weights)
        .map_err(|e| Error::invalid("worst-case weights", e.to_string()))?;
    let mut g = rng::rng(seed);
    let rows: Vec<usize> = (0..source.n()).map(|_| dist.sample(&mut g)).collect();
    let picked = source.subset(&rows)?;
    let unit = vec![1.0; picked.n()];
    picked.with_weights(unit)
}

/// Transfer accuracy: fit one model of `learner_spec`'s class on the
/// worst-case-reweighted source, then score its 0-1 accuracy on every target.
/// Returns a map keyed by target position in `targets`.
pub fn transfer_accuracy(
    weights: &WorstCaseWeights,
    source: &TabularDataset,
    targets: &[TabularDataset],
    learner_spec: &LearnerSpec,
    seed: u64,
) -> Result<BTreeMap<usize, f64>> {
    for (id, t) in targets.iter().enumerate() {
        if t.d() != source.d() {
            return Err(Error::DomainMismatch {
                message: format!(
                    "target {id} has {} features, source has {}",
                    t.d(),
                    source.d()
                ),
            });
        }
    }
    let model = refit_on_worst_case(weights, source, learner_spec, RefitMode::Weights, seed)?;
    let ids: Vec<usize> = (0..targets.len()).collect();
    let accs = exec::par_map(&ids, |&id| accuracy(&model, &targets[id]));
    Ok(ids.into_iter().zip(accs).collect())
}

/// Run the full §-style study for one ambiguity spec: train the matching
/// robust linear model (hinge loss), extract the worst case at it, and measure
/// optimal in-distribution accuracy and per-target transfer accuracy with
/// `learner_spec`-class refits.
pub fn run_study(
    data: &TabularDataset,
    spec: &AmbiguitySpec,
    train_cfg: &TrainConfig,
    learner_spec: &LearnerSpec,
    targets: &[TabularDataset],
    seed: u64,
) -> Result<WorstCaseStudy> {
    let fit = crate::dro::train_for_spec(data, spec, train_cfg, LossKind::Hinge)?;
    let weights = extract_worst_case(data, &fit.model, spec)?;
    let optimal_iid_acc =
        optimal_iid_accuracy(&weights, data, learner_spec, rng::derive(seed, 1))?;
    let transfer_acc =
        transfer_accuracy(&weights, data, targets, learner_spec, rng::derive(seed, 2))?;
    Ok(WorstCaseStudy {
        spec: spec.clone(),
        model: fit.model,
        weights,
        optimal_iid_acc,
        transfer_acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dro::{train_f_dro, AmbiguityKind};
    use crate::learners::fit_linear;
    use rand::Rng;

    /// Wide-margin two-cluster data: `y = 1{x1 > 0}` with clusters at ±1 and
    /// `noise` of the labels flipped. Stable under reweighting: every sane
    /// model splits the clusters identically.
    fn cluster_data(n: usize, noise: f64, seed: u64) -> TabularDataset {
        let mut g = rng::rng(seed);
        let mut features = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let side = if g.gen::<f64>() < 0.5 { -1.0 } else { 1.0 };
            let x1 = side + 0.3 * (g.gen::<f64>() - 0.5);
            let x2: f64 = g.gen();
            let mut y = u8::from(x1 > 0.0);
            if g.gen::<f64>() < noise {
                y ^= 1;
            }
            features.extend_from_slice(&[x1, x2]);
            labels.push(y);
        }
        TabularDataset::with_unit_weights(features, labels, vec!["x1".into(), "x2".into()])
            .unwrap()
    }

    fn hinge_cfg() -> TrainConfig {
        TrainConfig {
            steps: 400,
            ..TrainConfig::default()
        }
    }

    fn linear_spec() -> LearnerSpec {
        LearnerSpec::Linear {
            loss: LossKind::Hinge,
            cfg: hinge_cfg(),
        }
    }

    #[test]
    fn zero_radius_returns_the_base_distribution() {
        let data = cluster_data(40, 0.1, 1);
        let model = fit_linear(&data, LossKind::Hinge, &hinge_cfg()).unwrap();
        let spec = AmbiguitySpec::new(AmbiguityKind::Kl, 0.0);
        let out = extract_worst_case(&data, &model, &spec).unwrap();
        assert_eq!(out.weights, data.weight_distribution());
    }

    #[test]
    fn kl_worst_case_has_exponential_tilt_structure() {
        let data = cluster_data(60, 0.15, 2);
        let spec = AmbiguitySpec::new(AmbiguityKind::Kl, 0.1);
        let model = train_f_dro(&data, &spec, &hinge_cfg(), LossKind::Hinge).unwrap();
        let out = extract_worst_case(&data, &model, &spec).unwrap();

        // q_i ∝ p_i · exp(ℓ_i/λ*): log(q/p) must be affine in the loss with a
        // single positive slope 1/λ* across every supported point.
        let losses = hinge_losses(&model, &data);
        let base = data.weight_distribution();
        let pts: Vec<(f64, f64)> = (0..data.n())
            .filter(|&i| out.weights[i] > 1e-12 && base[i] > 0.0)
            .map(|i| (losses[i], (out.weights[i] / base[i]).ln()))
            .collect();
        let (l0, g0) = pts[0];
        let (l1, g1) = pts
            .iter()
            .copied()
            .find(|(l, _)| (l - l0).abs() > 1e-6)
            .expect("losses vary");
        let slope = (g1 - g0) / (l1 - l0);
        assert!(slope > 0.0, "tilt slope {slope} not positive");
        for &(l, g) in &pts {
            let predicted = g0 + slope * (l - l0);
            assert!((g - predicted).abs() < 1e-6, "point ({l}, {g}) off the tilt line");
        }
    }

    #[test]
    fn cvar_quarter_concentrates_on_the_top_two_of_eight() {
        // Eight equally weighted points, two with much larger loss: at α=1/4
        // each cap is (1/8)/(1/4) = 1/2, so the worst case is exactly half
        // mass on each of the top-2 points.
        let features: Vec<f64> = (0..8).flat_map(|i| [i as f64, 0.0]).collect();
        let labels = vec![0, 0, 0, 0, 0, 0, 1, 1];
        let data = TabularDataset::with_unit_weights(
            features,
            labels,
            vec!["x1".into(), "x2".into()],
        )
        .unwrap();
        // Model predicts class 0 strongly everywhere: the two label-1 rows
        // carry large hinge losses.
        let model = LinearModel {
            coefficients: vec![-1.0, 0.0],
            intercept: -1.0,
            loss_kind: LossKind::Hinge,
        };
        let spec = AmbiguitySpec::new(AmbiguityKind::Cvar, 0.25);
        let out = extract_worst_case(&data, &model, &spec).unwrap();
        let expected = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5];
        for (w, e) in out.weights.iter().zip(&expected) {
            assert!((w - e).abs() < 1e-12, "{:?}", out.weights);
        }
    }

    #[test]
    fn worst_case_value_never_beats_the_adversary() {
        let data = cluster_data(50, 0.2, 3);
        let model = fit_linear(&data, LossKind::Hinge, &hinge_cfg()).unwrap();
        let losses = hinge_losses(&model, &data);
        let base = data.weight_distribution();
        let mean: f64 = losses.iter().zip(&base).map(|(l, p)| l * p).sum();
        for (kind, radius) in [
            (AmbiguityKind::Kl, 0.15),
            (AmbiguityKind::Chi2, 0.3),
            (AmbiguityKind::Tv, 0.2),
            (AmbiguityKind::Cvar, 0.4),
        ] {
            let out = extract_worst_case(&data, &model, &AmbiguitySpec::new(kind, radius)).unwrap();
            assert!(
                out.attained_value >= mean - 1e-9,
                "{kind:?}: {} < {mean}",
                out.attained_value
            );
        }
    }

    #[test]
    fn transport_kinds_are_rejected() {
        let data = cluster_data(20, 0.0, 4);
        let model = fit_linear(&data, LossKind::Hinge, &hinge_cfg()).unwrap();
        for kind in [
            AmbiguityKind::Wasserstein,
            AmbiguityKind::AugWasserstein,
            AmbiguityKind::SatisficingWasserstein,
            AmbiguityKind::MarginalCvar,
            AmbiguityKind::ConditionalGamma,
        ] {
            let err = extract_worst_case(&data, &model, &AmbiguitySpec::new(kind, 0.1));
            assert!(
                matches!(err, Err(Error::UnsupportedKind { .. })),
                "{kind:?} should be rejected"
            );
        }
    }

    #[test]
    fn zero_radius_iid_accuracy_matches_plain_kfold() {
        // n = 128 rows: the ε=0 worst case is the uniform distribution 1/128,
        // a power-of-two rescaling of the unit weights, so the fold models and
        // scores match the plain run bitwise.
        let data = cluster_data(128, 0.1, 5);
        let model = fit_linear(&data, LossKind::Hinge, &hinge_cfg()).unwrap();
        let spec = AmbiguitySpec::new(AmbiguityKind::Chi2, 0.0);
        let weights = extract_worst_case(&data, &model, &spec).unwrap();
        let got = optimal_iid_accuracy(&weights, &data, &linear_spec(), 7).unwrap();
        let plain = kfold_accuracy(&data, 4, &linear_spec(), 7).unwrap();
        assert_eq!(got, plain);
    }

    #[test]
    fn iid_accuracy_is_invariant_to_weight_rescaling() {
        let data = cluster_data(96, 0.15, 6);
        let model = fit_linear(&data, LossKind::Hinge, &hinge_cfg()).unwrap();
        let spec = AmbiguitySpec::new(AmbiguityKind::Kl, 0.2);
        let weights = extract_worst_case(&data, &model, &spec).unwrap();
        let base = optimal_iid_accuracy(&weights, &data, &linear_spec(), 11).unwrap();
        for scale in [2.0, 0.25, 1.7] {
            let scaled = WorstCaseWeights {
                weights: weights.weights.iter().map(|w| w * scale).collect(),
                attained_value: weights.attained_value,
            };
            let got = optimal_iid_accuracy(&scaled, &data, &linear_spec(), 11).unwrap();
            assert!(
                (got - base).abs() < 1e-12,
                "scale {scale}: {got} vs {base}"
            );
        }
    }

    #[test]
    fn noise_concentration_lowers_achievable_accuracy() {
        // 10% label noise: larger KL radii tilt mass onto the flipped rows,
        // which no model of the class can fit, so the in-distribution optimum
        // declines.
        let data = cluster_data(400, 0.1, 8);
        let mut accs = Vec::new();
        for radius in [0.0, 0.05, 0.2] {
            let spec = AmbiguitySpec::new(AmbiguityKind::Kl, radius);
            let model = train_f_dro(&data, &spec, &hinge_cfg(), LossKind::Hinge).unwrap();
            let weights = extract_worst_case(&data, &model, &spec).unwrap();
            accs.push(optimal_iid_accuracy(&weights, &data, &linear_spec(), 13).unwrap());
        }
        assert!(accs[0] > accs[2] + 0.02, "no concentration effect: {accs:?}");
        assert!(accs[0] >= accs[1] - 1e-9 && accs[1] >= accs[2] - 1e-9, "{accs:?}");
    }

    #[test]
    fn uniform_weights_transfer_equals_plain_fit_then_evaluate() {
        let source = cluster_data(128, 0.1, 9);
        let target = cluster_data(300, 0.1, 10);
        let uniform = WorstCaseWeights {
            weights: vec![1.0 / 128.0; 128],
            attained_value: 0.0,
        };
        let got = transfer_accuracy(&uniform, &source, &[target.clone()], &linear_spec(), 21)
            .unwrap();
        let plain_model = linear_spec().fit(&source, 21).unwrap();
        let plain = accuracy(&plain_model, &target);
        assert!((got[&0] - plain).abs() < 1e-12, "{} vs {plain}", got[&0]);
    }

    #[test]
    fn self_transfer_at_zero_radius_matches_kfold_on_stable_data() {
        // On wide-margin clusters every fold model and the full fit predict
        // identically, so in-sample transfer equals the k-fold estimate.
        let data = cluster_data(1000, 0.1, 12);
        let model = fit_linear(&data, LossKind::Hinge, &hinge_cfg()).unwrap();
        let spec = AmbiguitySpec::new(AmbiguityKind::Tv, 0.0);
        let weights = extract_worst_case(&data, &model, &spec).unwrap();
        let transfer =
            transfer_accuracy(&weights, &data, &[data.clone()], &linear_spec(), 14).unwrap();
        let folds = optimal_iid_accuracy(&weights, &data, &linear_spec(), 14).unwrap();
        assert!(
            (transfer[&0] - folds).abs() < 1e-12,
            "{} vs {folds}",
            transfer[&0]
        );
    }

    #[test]
    fn every_target_gets_a_key_even_with_disjoint_support() {
        let source = cluster_data(60, 0.0, 15);
        let far: Vec<f64> = (0..20).flat_map(|i| [100.0 + i as f64, -50.0]).collect();
        let target_a = TabularDataset::with_unit_weights(
            far,
            vec![1; 20],
            vec!["x1".into(), "x2".into()],
        )
        .unwrap();
        let target_b = cluster_data(25, 0.0, 16);
        let uniform = WorstCaseWeights {
            weights: vec![1.0; 60],
            attained_value: 0.0,
        };
        let map =
            transfer_accuracy(&uniform, &source, &[target_a, target_b], &linear_spec(), 17)
                .unwrap();
        assert_eq!(map.len(), 2);
        assert!(map.contains_key(&0) && map.contains_key(&1));
        assert!(map.values().all(|a| (0.0..=1.0).contains(a)));

        let mismatched = TabularDataset::with_unit_weights(
            vec![0.0, 1.0, 2.0],
            vec![0, 1, 0],
            vec!["only".into()],
        )
        .unwrap();
        let err = transfer_accuracy(&uniform, &source, &[mismatched], &linear_spec(), 17);
        assert!(matches!(err, Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn resample_refit_agrees_with_weighted_refit_on_stable_data() {
        let source = cluster_data(500, 0.05, 18);
        let target = cluster_data(400, 0.05, 19);
        let uniform = WorstCaseWeights {
            weights: vec![1.0; 500],
            attained_value: 0.0,
        };
        let weighted =
            refit_on_worst_case(&uniform, &source, &linear_spec(), RefitMode::Weights, 23)
                .unwrap();
        let resampled =
            refit_on_worst_case(&uniform, &source, &linear_spec(), RefitMode::Resample, 23)
                .unwrap();
        // Different training sets, but both models split the clusters, so
        // their hard predictions agree everywhere that matters.
        assert_eq!(accuracy(&weighted, &target), accuracy(&resampled, &target));
    }

    #[test]
    fn full_study_runs_and_serializes() {
        let data = cluster_data(160, 0.1, 20);
        let targets = vec![cluster_data(80, 0.1, 21), cluster_data(80, 0.3, 22)];
        let spec = AmbiguitySpec::new(AmbiguityKind::Kl, 0.1);
        let study = run_study(&data, &spec, &hinge_cfg(), &linear_spec(), &targets, 25).unwrap();
        assert!((0.0..=1.0).contains(&study.optimal_iid_acc));
        assert_eq!(study.transfer_acc.len(), 2);

        let json = serde_json::to_string(&study).unwrap();
        let back: WorstCaseStudy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, study);

        let csv = study.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "kind,radius,target_id,transfer_acc");
        let first = lines.next().unwrap();
        assert!(first.starts_with("kl,0.1,0,"), "{first}");
        assert_eq!(csv.lines().count(), 3);
    }
}
