//! Find covariate regions where the conditional relationship moved.
//!
//! The main routine compares the two domains' best outcome models on a shared
//! covariate distribution and fits a shallow interpretable tree to their
//! disagreement; leaves whose predicted discrepancy clears a threshold come
//! back as axis-aligned [`Region`]s. A sample-efficient variant needs only a
//! small labelled target sample. Two companions support acting on the result:
//! per-feature shift scores for covariate-shift triage, and a simulation of
//! region-targeted data collection.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{fit_shared_weights, SharedWeights};
use crate::error::{Error, Result};
use crate::learners::{
    accuracy, fit_gbt_classifier, fit_tree, GbtConfig, LearnerSpec, Predictor, TreeParams,
};
use crate::region::{Region, RegionBound};
use crate::rng;
use crate::tabular::{DomainPair, TabularDataset};

/// Minimum labelled target rows for the full two-model search.
const MIN_FULL_TARGET: usize = 100;
/// Minimum labelled target rows for the light variant.
const MIN_LIGHT_TARGET: usize = 20;

/// Knobs for the region search that are not part of the operation signature:
/// the boosting configurations for the domain classifier and the two outcome
/// models, and the growth limits of the interpretable tree `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    /// Config for the domain classifier behind the shared weights.
    pub classifier: GbtConfig,
    /// Config for the per-domain outcome models `f_P`, `f_Q`.
    pub outcome: GbtConfig,
    /// Minimum rows per leaf of the interpretable tree.
    pub h_min_leaf: usize,
    /// Complexity floor for `h` splits, as a fraction of the root SSE. Keeps
    /// flat-response cells from being shattered into equal-discrepancy slivers.
    pub h_min_gain_frac: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            classifier: GbtConfig::default(),
            // Sharper than the all-purpose default: the outcome models must
            // localize the conditional's decision boundary, or the smeared
            // transition band shows up as a spurious low-discrepancy dip that
            // the interpretable tree then carves around.
            outcome: GbtConfig {
                rounds: 120,
                learning_rate: 0.1,
                max_depth: 4,
                min_leaf: 10,
            },
            h_min_leaf: 30,
            h_min_gain_frac: 0.02,
        }
    }
}

/// Per-feature covariate-shift scores between a reference sample and a
/// worst-group sample: `s_i = |mean_ref − mean_worst| / min(mean_ref,
/// mean_worst)`, with features whose smaller mean is ≤ 1e-9 flagged undefined
/// (`None`) rather than reported as a blown-up ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShiftScore {
    /// One entry per feature; `None` marks an undefined (near-zero-mean) score.
    pub scores: Vec<Option<f64>>,
    /// All feature indices ordered by score descending; undefined ones last.
    pub top_k: Vec<usize>,
}

/// Accuracy of one learner under the three collection arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionRow {
    pub learner: String,
    /// (a) trained on the source only.
    pub source_only: f64,
    /// (b) source plus `n_extra` uniformly sampled target rows.
    pub random_extra: f64,
    /// (c) source plus `n_extra` target rows sampled inside the region.
    pub targeted_extra: f64,
}

/// Comparison table from [`simulate_collection`]: target accuracy per learner
/// and arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionTable {
    pub n_extra: usize,
    pub region_rule: String,
    pub rows: Vec<CollectionRow>,
}

impl CollectionTable {
    /// CSV rendering, one row per learner.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("learner,source_only,random_extra,targeted_extra\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.learner, r.source_only, r.random_extra, r.targeted_extra
            ));
        }
        out
    }
}

/// Identify regions with strong conditional shift using both domains.
///
/// Pipeline: fit the domain classifier and likelihood-ratio weights; fit the
/// outcome models `f_P` (source, reweighted by `w_P`) and `f_Q` (target,
/// reweighted by `w_Q`), both toward the shared covariate distribution; fit a
/// depth-`tree_depth` tree `h` to the absolute probability gap
/// `|f_P(x) − f_Q(x)|` on the pooled rows, each side carrying normalized
/// weights with total mass 1/2; return the leaves predicting ≥ `b` as regions,
/// sorted by discrepancy descending.
///
/// Requires both labels present in each domain and at least 100 labelled
/// target rows ([`identify_region_light`] covers smaller targets). A constant
/// domain classifier is fine — the weights degrade to constants and the search
/// proceeds.
pub fn identify_region(
    pair: &DomainPair,
    b: f64,
    tree_depth: usize,
    cfg: &RegionConfig,
) -> Result<Vec<Region>> {
    validate_threshold(b)?;
    if pair.target.n() < MIN_FULL_TARGET {
        return Err(Error::TooFewRows {
            context: "identify_region target",
            needed: MIN_FULL_TARGET,
            got: pair.target.n(),
        });
    }
    require_both_labels(&pair.source, "source")?;
    require_both_labels(&pair.target, "target")?;

    let shared = fit_shared_weights(pair, &cfg.classifier)?;
    let f_p = fit_outcome_model(&pair.source, &shared.w_source, &cfg.outcome)?;
    let f_q = fit_outcome_model(&pair.target, &shared.w_target, &cfg.outcome)?;

    // Pooled rows carry per-side normalized weights, each side totalling 1/2.
    let (lambda_p, lambda_q) = lambda_weights(pair, &shared);
    let mut h_weights: Vec<f64> = lambda_p.iter().map(|l| 0.5 * l).collect();
    h_weights.extend(lambda_q.iter().map(|l| 0.5 * l));
    let pooled = pool_rows(&pair.source, &pair.target, h_weights)?;
    let gap: Vec<f64> = (0..pooled.n())
        .map(|i| (f_p.prob(pooled.row(i)) - f_q.prob(pooled.row(i))).abs())
        .collect();

    grow_and_harvest(&pooled, &gap, b, tree_depth, cfg)
}

/// Sample-efficient variant: only the source outcome model is fit (reweighted
/// toward the shared distribution), and the tree `h` regresses the target
/// rows' 0-1 residuals `|f_P(x_j) − y_j|` (hard prediction vs. label) under
/// normalized target-side weights. Needs only 20 labelled target rows.
pub fn identify_region_light(
    pair: &DomainPair,
    b: f64,
    tree_depth: usize,
    cfg: &RegionConfig,
) -> Result<Vec<Region>> {
    validate_threshold(b)?;
    if pair.target.n() < MIN_LIGHT_TARGET {
        return Err(Error::TooFewRows {
            context: "identify_region_light target",
            needed: MIN_LIGHT_TARGET,
            got: pair.target.n(),
        });
    }
    require_both_labels(&pair.source, "source")?;

    let shared = fit_shared_weights(pair, &cfg.classifier)?;
    let f_p = fit_outcome_model(&pair.source, &shared.w_source, &cfg.outcome)?;

    let (_, lambda_q) = lambda_weights(pair, &shared);
    let target = pair.target.with_weights(lambda_q)?;
    let residual: Vec<f64> = (0..target.n())
        .map(|j| f64::from(f_p.predict(target.row(j)) != target.label(j)))
        .collect();

    grow_and_harvest(&target, &residual, b, tree_depth, cfg)
}

/// Per-side normalized `λ` vectors (each sums to 1): the row's own weight
/// times its likelihood ratio, normalized within its domain.
pub(crate) fn lambda_weights(pair: &DomainPair, shared: &SharedWeights) -> (Vec<f64>, Vec<f64>) {
    let normalize = |raw: Vec<f64>| -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    };
    let raw_p: Vec<f64> = (0..pair.source.n())
        .map(|i| pair.source.weight(i) * shared.w_source[i])
        .collect();
    let raw_q: Vec<f64> = (0..pair.target.n())
        .map(|j| pair.target.weight(j) * shared.w_target[j])
        .collect();
    (normalize(raw_p), normalize(raw_q))
}

fn validate_threshold(b: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::invalid("b", format!("{b} not a finite value ≥ 0")));
    }
    Ok(())
}

fn require_both_labels(data: &TabularDataset, which: &str) -> Result<()> {
    let has_one = data.labels().iter().any(|&y| y == 1);
    let has_zero = data.labels().iter().any(|&y| y == 0);
    if !(has_one && has_zero) {
        return Err(Error::invalid(
            "domain labels",
            format!("{which} domain must contain both labels"),
        ));
    }
    Ok(())
}

/// Outcome model for one domain: a boosted classifier fit with the row weights
/// multiplied by the shared-distribution likelihood ratios.
fn fit_outcome_model(
    data: &TabularDataset,
    ratios: &[f64],
    cfg: &GbtConfig,
) -> Result<crate::learners::GBTModel> {
    let weights: Vec<f64> = (0..data.n()).map(|i| data.weight(i) * ratios[i]).collect();
    fit_gbt_classifier(&data.with_weights(weights)?, cfg)
}

/// Stack rows of both domains with the provided weights (labels kept, unused).
fn pool_rows(
    source: &TabularDataset,
    target: &TabularDataset,
    weights: Vec<f64>,
) -> Result<TabularDataset> {
    let d = source.d();
    let mut features = Vec::with_capacity((source.n() + target.n()) * d);
    let mut labels = Vec::with_capacity(source.n() + target.n());
    for data in [source, target] {
        for i in 0..data.n() {
            features.extend_from_slice(data.row(i));
            labels.push(data.label(i));
        }
    }
    TabularDataset::new(features, labels, weights, source.feature_names().to_vec())
}

/// Fit the interpretable tree and return qualifying leaves as regions.
fn grow_and_harvest(
    data: &TabularDataset,
    response: &[f64],
    b: f64,
    tree_depth: usize,
    cfg: &RegionConfig,
) -> Result<Vec<Region>> {
    let params = TreeParams {
        max_depth: tree_depth,
        min_leaf: cfg.h_min_leaf,
        min_gain_frac: cfg.h_min_gain_frac,
    };
    let tree = fit_tree(data, response, &params)?;
    let names = data.feature_names();
    let mut regions: Vec<Region> = tree
        .leaf_cells(data.d())
        .into_iter()
        .filter(|cell| cell.value >= b)
        .map(|cell| {
            let constraints = cell
                .bounds
                .iter()
                .enumerate()
                .filter(|(_, (lo, hi))| lo.is_finite() || hi.is_finite())
                .map(|(j, (lo, hi))| RegionBound {
                    feature: names[j].clone(),
                    low: lo.is_finite().then_some(*lo),
                    high: hi.is_finite().then_some(*hi),
                })
                .collect();
            Region {
                constraints,
                discrepancy: cell.value,
                support_share: cell.weight_share,
            }
        })
        .collect();
    regions.sort_by(|a, c| {
        c.discrepancy
            .partial_cmp(&a.discrepancy)
            .expect("leaf predictions are finite")
    });
    Ok(regions)
}

/// Per-feature covariate-shift scores between two same-schema samples.
pub fn feature_shift_scores(
    reference: &TabularDataset,
    worst_group: &TabularDataset,
) -> Result<FeatureShiftScore> {
    if reference.d() != worst_group.d() {
        return Err(Error::DomainMismatch {
            message: format!(
                "reference has {} features, worst group has {}",
                reference.d(),
                worst_group.d()
            ),
        });
    }
    let ref_means = reference.feature_means();
    let grp_means = worst_group.feature_means();
    let scores: Vec<Option<f64>> = ref_means
        .iter()
        .zip(&grp_means)
        .map(|(&a, &b)| {
            let floor = a.min(b);
            (floor > 1e-9).then(|| (a - b).abs() / floor)
        })
        .collect();
    let mut top_k: Vec<usize> = (0..scores.len()).collect();
    // Undefined scores rank last; ties break toward the lower feature index
    // (the sort is stable over the index-ordered input).
    top_k.sort_by(|&i, &j| match (&scores[i], &scores[j]) {
        (Some(a), Some(b)) => b.partial_cmp(a).expect("scores are finite"),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(FeatureShiftScore { scores, top_k })
}

/// Simulate region-targeted data collection: train each learner on (a) the
/// source alone, (b) source plus `n_extra` random labelled target rows, and
/// (c) source plus `n_extra` labelled target rows drawn inside `region`, and
/// report each arm's accuracy on the full target.
///
/// Rows are sampled without replacement with the given seed. Errors when the
/// target has fewer than `n_extra` rows overall or inside the region.
pub fn simulate_collection(
    pair: &DomainPair,
    region: &Region,
    n_extra: usize,
    learner_specs: &[LearnerSpec],
    seed: u64,
) -> Result<CollectionTable> {
    if pair.target.n() < n_extra {
        return Err(Error::TooFewRows {
            context: "simulate_collection target",
            needed: n_extra,
            got: pair.target.n(),
        });
    }
    let in_region = pair.target.rows_in_region(region)?;
    if in_region.len() < n_extra {
        return Err(Error::TooFewRows {
            context: "simulate_collection region rows",
            needed: n_extra,
            got: in_region.len(),
        });
    }

    let draw = |pool: &[usize], salt: u64| -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut g = rng::rng(rng::derive(seed, salt));
        let mut rows: Vec<usize> = pool.to_vec();
        rows.shuffle(&mut g);
        rows.truncate(n_extra);
        rows.sort_unstable();
        rows
    };
    let all_rows: Vec<usize> = (0..pair.target.n()).collect();
    let random_rows = draw(&all_rows, 1);
    let targeted_rows = draw(&in_region, 2);

    let arm = |extra: Option<&[usize]>| -> Result<TabularDataset> {
        match extra {
            None | Some([]) => Ok(pair.source.clone()),
            Some(rows) => pair.source.concat(&pair.target.subset(rows)?),
        }
    };
    let arms = [
        arm(None)?,
        arm(Some(&random_rows))?,
        arm(Some(&targeted_rows))?,
    ];

    let mut rows = Vec::with_capacity(learner_specs.len());
    for (k, spec) in learner_specs.iter().enumerate() {
        let mut accs = [0.0; 3];
        for (a, train) in arms.iter().enumerate() {
            let model = spec.fit(train, rng::derive(seed, 16 + (k * 3 + a) as u64))?;
            accs[a] = accuracy(&model, &pair.target);
        }
        rows.push(CollectionRow {
            learner: format!("{}_{k}", spec.class_name()),
            source_only: accs[0],
            random_extra: accs[1],
            targeted_extra: accs[2],
        });
    }
    Ok(CollectionTable {
        n_extra,
        region_rule: region.rule(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::synth_shift;

    fn planted() -> Region {
        Region::from_constraints(vec![RegionBound {
            feature: "x1".into(),
            low: Some(0.5),
            high: None,
        }])
    }

    fn light_cfg() -> RegionConfig {
        RegionConfig {
            classifier: GbtConfig {
                rounds: 40,
                learning_rate: 0.2,
                max_depth: 3,
                min_leaf: 5,
            },
            outcome: GbtConfig {
                rounds: 40,
                learning_rate: 0.2,
                max_depth: 3,
                min_leaf: 5,
            },
            ..RegionConfig::default()
        }
    }

    /// Light classifier, extra-sharp outcome models — what the recovery
    /// assertions need at this sample size.
    fn recovery_cfg() -> RegionConfig {
        RegionConfig {
            classifier: light_cfg().classifier,
            outcome: GbtConfig {
                rounds: 400,
                learning_rate: 0.15,
                max_depth: 6,
                min_leaf: 5,
            },
            ..RegionConfig::default()
        }
    }

    /// Jaccard overlap of two regions as subsets of the unit cube.
    fn unit_cube_jaccard(a: &Region, b: &Region, names: &[String]) -> f64 {
        let bounds = |r: &Region| -> Vec<(f64, f64)> {
            let mut out = vec![(0.0f64, 1.0f64); names.len()];
            for (idx, lo, hi) in r.resolve(names).unwrap() {
                out[idx] = (lo.max(0.0), hi.min(1.0));
            }
            out
        };
        let (ba, bb) = (bounds(a), bounds(b));
        let mut inter = 1.0;
        let mut vol_a = 1.0;
        let mut vol_b = 1.0;
        for j in 0..names.len() {
            vol_a *= (ba[j].1 - ba[j].0).max(0.0);
            vol_b *= (bb[j].1 - bb[j].0).max(0.0);
            inter *= (ba[j].1.min(bb[j].1) - ba[j].0.max(bb[j].0)).max(0.0);
        }
        inter / (vol_a + vol_b - inter)
    }

    #[test]
    fn lambda_vectors_each_sum_to_one() {
        let pair = synth_shift(300, 250, 3, &planted(), 0.9, 2).unwrap();
        let shared = fit_shared_weights(&pair, &light_cfg().classifier).unwrap();
        let (lp, lq) = lambda_weights(&pair, &shared);
        assert!((lp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((lq.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(lp.len(), 300);
        assert_eq!(lq.len(), 250);
    }

    #[test]
    fn planted_flip_region_is_recovered() {
        let pair = synth_shift(5000, 5000, 2, &planted(), 1.0, 7).unwrap();
        let regions = identify_region(&pair, 0.4, 2, &recovery_cfg()).unwrap();
        assert!(!regions.is_empty(), "no region cleared b = 0.4");
        let top = &regions[0];
        let names = pair.source.feature_names();
        let j = unit_cube_jaccard(top, &planted(), names);
        assert!(j >= 0.7, "Jaccard {j} for rule `{}`", top.rule());
        assert!(top.discrepancy >= 0.4 && top.support_share > 0.2);
    }

    #[test]
    fn no_shift_returns_no_regions_across_seeds() {
        let mut empties = 0;
        for seed in 0..10 {
            let pair = synth_shift(1500, 1500, 2, &planted(), 0.0, 100 + seed).unwrap();
            let regions = identify_region(&pair, 0.3, 3, &light_cfg()).unwrap();
            empties += usize::from(regions.is_empty());
        }
        assert!(empties >= 9, "only {empties}/10 null runs came back empty");
    }

    #[test]
    fn zero_threshold_returns_a_partition() {
        let pair = synth_shift(800, 700, 2, &planted(), 1.0, 9).unwrap();
        let regions = identify_region(&pair, 0.0, 3, &light_cfg()).unwrap();
        assert!(!regions.is_empty());
        let share: f64 = regions.iter().map(|r| r.support_share).sum();
        assert!((share - 1.0).abs() < 1e-9, "leaf shares sum to {share}");
        // Every point of the cube falls in exactly one returned region.
        let names = pair.source.feature_names();
        let mut g = rng::rng(77);
        use rand::Rng;
        for _ in 0..200 {
            let x = [g.gen::<f64>(), g.gen::<f64>()];
            let hits = regions
                .iter()
                .filter(|r| r.contains(names, &x).unwrap())
                .count();
            assert_eq!(hits, 1, "point {x:?} hit {hits} regions");
        }
    }

    #[test]
    fn swapping_domains_finds_the_same_region() {
        let pair = synth_shift(4000, 4000, 2, &planted(), 1.0, 11).unwrap();
        let fwd = identify_region(&pair, 0.4, 2, &recovery_cfg()).unwrap();
        let rev = identify_region(&pair.swapped(), 0.4, 2, &recovery_cfg()).unwrap();
        assert!(!fwd.is_empty() && !rev.is_empty());
        let j = unit_cube_jaccard(&fwd[0], &rev[0], pair.source.feature_names());
        assert!(j >= 0.8, "swap changed the top region: Jaccard {j}");
    }

    #[test]
    fn small_targets_are_rejected_with_the_right_floors() {
        let pair = synth_shift(300, 60, 2, &planted(), 1.0, 13).unwrap();
        let err = identify_region(&pair, 0.3, 2, &light_cfg()).unwrap_err();
        assert!(matches!(
            err,
            Error::TooFewRows {
                needed: 100,
                got: 60,
                ..
            }
        ));
        // 60 rows are fine for the light variant…
        assert!(identify_region_light(&pair, 0.3, 2, &light_cfg()).is_ok());
        // …but 10 are not.
        let tiny = synth_shift(300, 10, 2, &planted(), 1.0, 14).unwrap();
        let err = identify_region_light(&tiny, 0.3, 2, &light_cfg()).unwrap_err();
        assert!(matches!(err, Error::TooFewRows { needed: 20, .. }));
    }

    #[test]
    fn light_variant_recovers_the_planted_region_from_a_small_sample() {
        let pair = synth_shift(4000, 300, 2, &planted(), 1.0, 15).unwrap();
        let cfg = RegionConfig {
            h_min_leaf: 20,
            ..recovery_cfg()
        };
        let regions = identify_region_light(&pair, 0.4, 2, &cfg).unwrap();
        assert!(!regions.is_empty(), "no region cleared b = 0.4");
        let j = unit_cube_jaccard(&regions[0], &planted(), pair.source.feature_names());
        assert!(j >= 0.5, "Jaccard {j} for rule `{}`", regions[0].rule());
    }

    #[test]
    fn light_variant_is_empty_when_the_model_matches_the_target() {
        // Target labels are the source model's own hard predictions: all
        // residuals are exactly zero, so no leaf can clear any positive b.
        let pair = synth_shift(2000, 400, 2, &planted(), 0.0, 16).unwrap();
        let shared = fit_shared_weights(&pair, &light_cfg().classifier).unwrap();
        let f_p = fit_outcome_model(&pair.source, &shared.w_source, &light_cfg().outcome).unwrap();
        let relabelled: Vec<u8> = (0..pair.target.n())
            .map(|j| f_p.predict(pair.target.row(j)))
            .collect();
        let target = TabularDataset::new(
            (0..pair.target.n())
                .flat_map(|j| pair.target.row(j).to_vec())
                .collect(),
            relabelled,
            pair.target.weights().to_vec(),
            pair.target.feature_names().to_vec(),
        )
        .unwrap();
        let echo = DomainPair::new(pair.source.clone(), target, None).unwrap();
        for b in [1e-6, 0.05, 0.3] {
            let regions = identify_region_light(&echo, b, 3, &light_cfg()).unwrap();
            assert!(regions.is_empty(), "b = {b} returned {}", regions.len());
        }
    }

    #[test]
    fn shift_scores_match_hand_arithmetic() {
        // Feature means: reference (2, 0, 5), worst group (3, 0.5, 5).
        let reference = TabularDataset::with_unit_weights(
            vec![1.0, 0.0, 5.0, 3.0, 0.0, 5.0],
            vec![0, 1],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let worst = TabularDataset::with_unit_weights(
            vec![2.0, 0.5, 5.0, 4.0, 0.5, 5.0],
            vec![0, 1],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let out = feature_shift_scores(&reference, &worst).unwrap();
        assert_eq!(out.scores[0], Some(0.5));
        assert_eq!(out.scores[1], None, "zero reference mean must be flagged");
        assert_eq!(out.scores[2], Some(0.0));
        assert_eq!(out.top_k, vec![0, 2, 1], "undefined ranks last");

        let same = feature_shift_scores(&reference, &reference).unwrap();
        assert_eq!(same.scores[0], Some(0.0));
        assert_eq!(same.scores[2], Some(0.0));
    }

    #[test]
    fn collection_with_no_extra_rows_has_three_identical_arms() {
        let pair = synth_shift(400, 300, 2, &planted(), 1.0, 19).unwrap();
        let specs = vec![LearnerSpec::Gbt(light_cfg().outcome)];
        let table = simulate_collection(&pair, &planted(), 0, &specs, 5).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.source_only, row.random_extra);
        assert_eq!(row.source_only, row.targeted_extra);
    }

    #[test]
    fn targeted_collection_beats_random_collection_usually() {
        // Small source (≈200 rows inside the flipped region) and a 250-row
        // budget: the targeted arm outvotes the stale source rows inside the
        // region, the random arm (≈125 in-region rows) does not.
        let specs = vec![LearnerSpec::Gbt(light_cfg().outcome)];
        let mut wins = 0;
        for seed in 0..10 {
            let pair = synth_shift(400, 2000, 2, &planted(), 1.0, 200 + seed).unwrap();
            let table = simulate_collection(&pair, &planted(), 250, &specs, seed).unwrap();
            let row = &table.rows[0];
            wins += usize::from(row.targeted_extra >= row.random_extra);
        }
        assert!(wins >= 7, "targeted arm won only {wins}/10 paired runs");
    }

    #[test]
    fn collection_rejects_thin_regions() {
        let pair = synth_shift(300, 200, 2, &planted(), 1.0, 23).unwrap();
        let sliver = Region::from_constraints(vec![RegionBound {
            feature: "x1".into(),
            low: Some(0.999),
            high: Some(0.9995),
        }]);
        let specs = vec![LearnerSpec::Gbt(light_cfg().outcome)];
        let err = simulate_collection(&pair, &sliver, 50, &specs, 1).unwrap_err();
        assert!(matches!(err, Error::TooFewRows { .. }));

        let disjoint = Region::from_constraints(vec![RegionBound {
            feature: "x1".into(),
            low: Some(5.0),
            high: Some(6.0),
        }]);
        let err = simulate_collection(&pair, &disjoint, 1, &specs, 1).unwrap_err();
        assert!(matches!(err, Error::TooFewRows { got: 0, .. }));
    }

    #[test]
    fn regions_round_trip_as_json_and_print_rules() {
        let pair = synth_shift(2000, 2000, 2, &planted(), 1.0, 29).unwrap();
        let regions = identify_region(&pair, 0.4, 2, &light_cfg()).unwrap();
        let top = &regions[0];
        let json = serde_json::to_string(top).unwrap();
        let back: Region = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, top);
        assert!(top.rule().contains("x1"), "rule `{}`", top.rule());
    }
}
