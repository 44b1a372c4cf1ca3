//! Subpopulation-robust training over a discrete feature subset Z.
//!
//! Rows are partitioned by their exact value tuple on the Z columns (which must
//! be discrete or pre-binned: at most 64 distinct tuples). Two adversaries are
//! supported:
//!
//! - marginal (`train_marginal_dro`) — the adversary reweights whole Z-groups,
//!   maximising CVaR at level α of the per-group mean losses. With discrete Z
//!   this groupwise CVaR is the exact supremum over the mixture-component set;
//!   α = 1 recovers plain ERM.
//! - conditional (`train_conditional_dro`) — within each Z-cell the adversary
//!   retilts the two conditional label masses inside a [Γ⁻¹, Γ] density-ratio
//!   band and renormalises, always toward the label with the higher mean loss:
//!   the worse label's mass π₊ becomes Γπ₊/(Γπ₊ + π₋). Γ = 1 recovers ERM, and
//!   Γ is capped at 1e6, where the worse label takes essentially all
//!   conditional mass.
//!
//! Both trainers are hinge-loss classifiers driven by the shared subgradient
//! stepper with Danskin subgradients at the current worst case, and both return
//! the empirical-risk solution instead whenever it achieves a lower robust
//! objective.

use super::solve_cvar;
use crate::error::{Error, Result};
use crate::learners::{descend, LinearModel, LinearProblem, LossKind, StepEval, TrainConfig};
use crate::tabular::TabularDataset;

const MAX_GROUPS: usize = 64;
const GAMMA_CAP: f64 = 1e6;

/// Rows grouped by their exact bit pattern on the Z columns, in the
/// deterministic order of the sorted tuples.
fn partition_by_z(
    data: &TabularDataset,
    z_features: &[usize],
    what: &'static str,
) -> Result<Vec<Vec<usize>>> {
    if z_features.is_empty() {
        return Err(Error::invalid("z_features", "must name at least one feature"));
    }
    let d = data.d();
    if let Some(&bad) = z_features.iter().find(|&&j| j >= d) {
        return Err(Error::invalid(
            "z_features",
            format!("feature index {bad} out of range for d = {d}"),
        ));
    }
    let mut groups: std::collections::BTreeMap<Vec<u64>, Vec<usize>> =
        std::collections::BTreeMap::new();
    for i in 0..data.n() {
        let key: Vec<u64> = z_features
            .iter()
            .map(|&j| data.value(i, j).to_bits())
            .collect();
        groups.entry(key).or_default().push(i);
        if groups.len() > MAX_GROUPS {
            return Err(Error::TooManyGroups {
                what,
                count: groups.len(),
                max: MAX_GROUPS,
            });
        }
    }
    Ok(groups.into_values().collect())
}

/// Train a hinge classifier minimising CVaR_α of the per-Z-group mean losses —
/// the exact worst case when the adversary can reweight the discrete groups.
pub fn train_marginal_dro(
    data: &TabularDataset,
    z_features: &[usize],
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} must lie in (0, 1]"),
        ));
    }
    let groups = partition_by_z(data, z_features, "marginal z-partition")?;
    let problem = LinearProblem::new(data, LossKind::Hinge)?;
    let n = data.n();
    let total: f64 = data.total_weight();

    // Group masses and each row's share of its own group.
    let group_weight: Vec<f64> = groups
        .iter()
        .map(|rows| rows.iter().map(|&i| data.weight(i)).sum())
        .collect();
    let pi: Vec<f64> = group_weight.iter().map(|w| w / total).collect();
    let mut rel = vec![0.0f64; n];
    let mut group_of = vec![0usize; n];
    for (g, rows) in groups.iter().enumerate() {
        for &i in rows {
            group_of[i] = g;
            rel[i] = if group_weight[g] > 0.0 {
                data.weight(i) / group_weight[g]
            } else {
                0.0
            };
        }
    }

    let robust_step = |w: &[f64], b: f64| -> StepEval {
        let scores = problem.scores(w, b);
        let losses = problem.losses(&scores);
        if alpha == 1.0 {
            // Degenerate set: identical arithmetic to plain ERM.
            return problem.weighted_eval(&problem.base, &scores, &losses);
        }
        let group_loss: Vec<f64> = groups
            .iter()
            .enumerate()
            .map(|(g, rows)| {
                if group_weight[g] > 0.0 {
                    rows.iter().map(|&i| data.weight(i) * losses[i]).sum::<f64>()
                        / group_weight[g]
                } else {
                    0.0
                }
            })
            .collect();
        let (q_group, _) = solve_cvar(&group_loss, &pi, alpha);
        let q: Vec<f64> = (0..n).map(|i| q_group[group_of[i]] * rel[i]).collect();
        problem.weighted_eval(&q, &scores, &losses)
    };

    finish_with_erm_fallback(data, cfg, &problem, robust_step)
}

/// Conditional tilt of a cell's label masses toward the worse label:
/// returns (q_lo, q_hi) from base masses (π_lo, π_hi) and the odds bound Γ.
pub(crate) fn conditional_tilt(pi_lo: f64, pi_hi: f64, gamma: f64) -> (f64, f64) {
    let denom = gamma * pi_hi + pi_lo;
    (pi_lo / denom, gamma * pi_hi / denom)
}

/// Train a hinge classifier robust to the conditional label-shift adversary:
/// within every Z-cell the conditional label masses are retilted by the
/// [Γ⁻¹, Γ] band toward the higher-loss label.
pub fn train_conditional_dro(
    data: &TabularDataset,
    z_features: &[usize],
    gamma: f64,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    if !(gamma >= 1.0) {
        return Err(Error::invalid("gamma", format!("{gamma} must be ≥ 1")));
    }
    let gamma = gamma.min(GAMMA_CAP);
    let cells = partition_by_z(data, z_features, "conditional z-partition")?;
    let problem = LinearProblem::new(data, LossKind::Hinge)?;
    let n = data.n();
    let total: f64 = data.total_weight();

    // Per-cell label masses; rel[i] is the row's share of its (cell, label) mass.
    struct Cell {
        rows: Vec<usize>,
        share: f64,       // cell mass / total
        label_mass: [f64; 2],
    }
    let cells: Vec<Cell> = cells
        .into_iter()
        .map(|rows| {
            let mut label_mass = [0.0f64; 2];
            for &i in &rows {
                label_mass[data.label(i) as usize] += data.weight(i);
            }
            let cell_total = label_mass[0] + label_mass[1];
            Cell {
                rows,
                share: cell_total / total,
                label_mass,
            }
        })
        .collect();
    let mut rel = vec![0.0f64; n];
    let mut cell_of = vec![0usize; n];
    for (c, cell) in cells.iter().enumerate() {
        for &i in &cell.rows {
            cell_of[i] = c;
            let m = cell.label_mass[data.label(i) as usize];
            rel[i] = if m > 0.0 { data.weight(i) / m } else { 0.0 };
        }
    }
    let _ = &cell_of;

    let robust_step = |w: &[f64], b: f64| -> StepEval {
        let scores = problem.scores(w, b);
        let losses = problem.losses(&scores);
        if gamma == 1.0 {
            return problem.weighted_eval(&problem.base, &scores, &losses);
        }
        let mut q = vec![0.0f64; n];
        for cell in &cells {
            let cell_total = cell.label_mass[0] + cell.label_mass[1];
            if cell_total == 0.0 {
                continue;
            }
            // Weighted mean loss per label within the cell.
            let mut loss_sum = [0.0f64; 2];
            for &i in &cell.rows {
                loss_sum[data.label(i) as usize] += data.weight(i) * losses[i];
            }
            let pi = [
                cell.label_mass[0] / cell_total,
                cell.label_mass[1] / cell_total,
            ];
            let mean = [
                if cell.label_mass[0] > 0.0 { loss_sum[0] / cell.label_mass[0] } else { 0.0 },
                if cell.label_mass[1] > 0.0 { loss_sum[1] / cell.label_mass[1] } else { 0.0 },
            ];
            let q_label = if cell.label_mass[0] == 0.0
                || cell.label_mass[1] == 0.0
                || mean[0] == mean[1]
            {
                pi
            } else if mean[1] > mean[0] {
                let (lo, hi) = conditional_tilt(pi[0], pi[1], gamma);
                [lo, hi]
            } else {
                let (lo, hi) = conditional_tilt(pi[1], pi[0], gamma);
                [hi, lo]
            };
            for &i in &cell.rows {
                q[i] = cell.share * q_label[data.label(i) as usize] * rel[i];
            }
        }
        problem.weighted_eval(&q, &scores, &losses)
    };

    finish_with_erm_fallback(data, cfg, &problem, robust_step)
}

/// Run the robust descent, then keep whichever of (robust solution, ERM
/// solution) has the lower robust objective.
fn finish_with_erm_fallback<F>(
    data: &TabularDataset,
    cfg: &TrainConfig,
    problem: &LinearProblem,
    robust_step: F,
) -> Result<LinearModel>
where
    F: Fn(&[f64], f64) -> StepEval,
{
    let d = data.d();
    let outcome = descend(d, cfg, |w, b| robust_step(w, b))?;
    let erm = descend(d, cfg, |w, b| {
        let scores = problem.scores(w, b);
        let losses = problem.losses(&scores);
        problem.weighted_eval(&problem.base, &scores, &losses)
    })?;
    let penalty = |w: &[f64]| 0.5 * cfg.l2 * w.iter().map(|v| v * v).sum::<f64>();
    let erm_robust = robust_step(&erm.w, erm.b).objective + penalty(&erm.w);
    let (w, b) = if erm_robust < outcome.objective_total {
        (erm.w, erm.b)
    } else {
        (outcome.w, outcome.b)
    };
    Ok(LinearModel {
        coefficients: w,
        intercept: b,
        loss_kind: LossKind::Hinge,
    })
}
