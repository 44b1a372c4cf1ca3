//! Axis-aligned covariate regions.
//!
//! A region is a conjunction of half-open per-feature intervals `low ≤ x_f < high`.
//! Regions come out of the region finder as decision-tree leaf cells and go back in
//! as planted shift areas for the synthetic generator and as collection targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One interval constraint on a single feature. Bounds are `low ≤ x < high`;
/// a missing bound means unbounded on that side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBound {
    /// Feature name, matching the dataset's `feature_names`.
    pub feature: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub high: Option<f64>,
}

/// An axis-aligned region with the leaf metadata attached when it came from the
/// region finder (`discrepancy` = leaf's predicted conditional discrepancy,
/// `support_share` = share of the pooled weight landing in the leaf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub constraints: Vec<RegionBound>,
    #[serde(default)]
    pub discrepancy: f64,
    #[serde(default)]
    pub support_share: f64,
}

impl Region {
    /// A bare region from `(feature, low, high)` triples, no leaf metadata.
    pub fn from_constraints(constraints: Vec<RegionBound>) -> Self {
        Region {
            constraints,
            discrepancy: 0.0,
            support_share: 0.0,
        }
    }

    /// Resolve the constraint features against a dataset's feature names.
    /// Returns `(feature_index, low, high)` with infinities for missing bounds.
    pub fn resolve(&self, feature_names: &[String]) -> Result<Vec<(usize, f64, f64)>> {
        self.constraints
            .iter()
            .map(|c| {
                let idx = feature_names
                    .iter()
                    .position(|n| *n == c.feature)
                    .ok_or_else(|| Error::UnknownColumn {
                        column: c.feature.clone(),
                    })?;
                Ok((
                    idx,
                    c.low.unwrap_or(f64::NEG_INFINITY),
                    c.high.unwrap_or(f64::INFINITY),
                ))
            })
            .collect()
    }

    /// Membership test for a row, with constraints already resolved to indices.
    pub fn contains_resolved(resolved: &[(usize, f64, f64)], row: &[f64]) -> bool {
        resolved.iter().all(|&(j, lo, hi)| row[j] >= lo && row[j] < hi)
    }

    /// Membership test for a row given the dataset's feature names.
    pub fn contains(&self, feature_names: &[String], row: &[f64]) -> Result<bool> {
        let resolved = self.resolve(feature_names)?;
        Ok(Self::contains_resolved(&resolved, row))
    }

    /// Human-readable rule string, e.g. `x1 ∈ [0.5, 1) AND x3 ≥ 2`.
    pub fn rule(&self) -> String {
        if self.constraints.is_empty() {
            return "TRUE".to_string();
        }
        self.constraints
            .iter()
            .map(|c| match (c.low, c.high) {
                (Some(lo), Some(hi)) => format!("{} ∈ [{}, {})", c.feature, fmt(lo), fmt(hi)),
                (Some(lo), None) => format!("{} ≥ {}", c.feature, fmt(lo)),
                (None, Some(hi)) => format!("{} < {}", c.feature, fmt(hi)),
                (None, None) => format!("{} unconstrained", c.feature),
            })
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

fn fmt(v: f64) -> String {
    // Shortest round-trip form: "0.5", "1", "-3.25".
    format!("{v}")
}
