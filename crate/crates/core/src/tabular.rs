//! Tabular datasets: loading, weighting, balancing, splitting, synthesis.
//!
//! A [`TabularDataset`] is a dense row-major feature matrix with binary labels in
//! `{0, 1}` and a per-row weight vector. Weights travel with the dataset through
//! every operation in the crate: learners minimise weighted losses, metrics are
//! weighted means, and reweighting-style operations (balancing, worst-case
//! analysis) act purely on the weight vector.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::region::Region;
use crate::rng;

/// A weighted binary-labelled tabular dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<f64>, // row-major, n * d
    labels: Vec<u8>,
    weights: Vec<f64>,
    feature_names: Vec<String>,
    n: usize,
    d: usize,
}

impl TabularDataset {
    /// Build a dataset from parts, validating every invariant:
    /// lengths agree, labels are in `{0,1}`, features are finite, and weights are
    /// finite, non-negative, and not all zero.
    pub fn new(
        features: Vec<f64>,
        labels: Vec<u8>,
        weights: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.len() != n * d {
            return Err(Error::LengthMismatch {
                context: "feature matrix",
                expected: n * d,
                got: features.len(),
            });
        }
        if weights.len() != n {
            return Err(Error::LengthMismatch {
                context: "weights",
                expected: n,
                got: weights.len(),
            });
        }
        for (i, &y) in labels.iter().enumerate() {
            if y > 1 {
                return Err(Error::invalid("labels", format!("label {y} at row {i}; labels must be 0 or 1")));
            }
        }
        for (idx, &v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature {
                    row: idx / d.max(1),
                    col: idx % d.max(1),
                });
            }
        }
        validate_weights(&weights)?;
        Ok(TabularDataset {
            features,
            labels,
            weights,
            feature_names,
            n,
            d,
        })
    }

    /// Same dataset with unit weights.
    pub fn with_unit_weights(
        features: Vec<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        Self::new(features, labels, vec![1.0; n], feature_names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.d + j]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weights normalised to a probability vector.
    pub fn weight_distribution(&self) -> Vec<f64> {
        let total = self.total_weight();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Replace the weight vector (same validation as construction).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n {
            return Err(Error::LengthMismatch {
                context: "weights",
                expected: self.n,
                got: weights.len(),
            });
        }
        validate_weights(&weights)?;
        let mut out = self.clone();
        out.weights = weights;
        Ok(out)
    }

    /// Rows selected by index, in the given order (weights kept).
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(rows.len() * self.d);
        let mut labels = Vec::with_capacity(rows.len());
        let mut weights = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            weights.push(self.weights[i]);
        }
        TabularDataset::new(features, labels, weights, self.feature_names.clone())
    }

    /// Concatenate rows of `other` after `self` (schemas must match).
    pub fn concat(&self, other: &TabularDataset) -> Result<Self> {
        if self.feature_names != other.feature_names {
            return Err(Error::DomainMismatch {
                message: "cannot concatenate datasets with different feature names".into(),
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        TabularDataset::new(features, labels, weights, self.feature_names.clone())
    }

    /// Weighted mean of each feature column.
    pub fn feature_means(&self) -> Vec<f64> {
        let total = self.total_weight();
        let mut means = vec![0.0; self.d];
        for i in 0..self.n {
            let w = self.weights[i];
            for (j, m) in means.iter_mut().enumerate() {
                *m += w * self.value(i, j);
            }
        }
        for m in &mut means {
            *m /= total;
        }
        means
    }

    /// Indices of rows inside `region`.
    pub fn rows_in_region(&self, region: &Region) -> Result<Vec<usize>> {
        let resolved = region.resolve(&self.feature_names)?;
        Ok((0..self.n)
            .filter(|&i| Region::contains_resolved(&resolved, self.row(i)))
            .collect())
    }

    /// Write the dataset as CSV with the label in column `label_column`.
    /// Weights are not written; loading the file back yields unit weights.
    pub fn write_csv(&self, path: &Path, label_column: &str) -> Result<()> {
        let mut out = Vec::new();
        let mut header: Vec<&str> = self.feature_names.iter().map(|s| s.as_str()).collect();
        header.push(label_column);
        writeln!(out, "{}", header.join(",")).expect("write to vec");
        for i in 0..self.n {
            let mut fields: Vec<String> = self.row(i).iter().map(|v| format_cell(*v)).collect();
            fields.push(format!("{}", self.labels[i]));
            writeln!(out, "{}", fields.join(",")).expect("write to vec");
        }
        std::fs::write(path, out).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

fn format_cell(v: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips, which keeps
    // written files byte-stable across runs.
    format!("{v}")
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    let mut any_positive = false;
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights);
        }
        if w > 0.0 {
            any_positive = true;
        }
    }
    if !any_positive {
        return Err(Error::InvalidWeights);
    }
    Ok(())
}

/// A source→target pair of datasets sharing a schema, with an optional small
/// labelled probe sample from the target for validation-style selection.
#[derive(Debug, Clone)]
pub struct DomainPair {
    pub source: TabularDataset,
    pub target: TabularDataset,
    pub target_probe: Option<TabularDataset>,
}

impl DomainPair {
    pub fn new(
        source: TabularDataset,
        target: TabularDataset,
        target_probe: Option<TabularDataset>,
    ) -> Result<Self> {
        for (other, name) in [(&target, "target"), (target_probe.as_ref().unwrap_or(&target), "target_probe")] {
            if source.feature_names() != other.feature_names() {
                return Err(Error::DomainMismatch {
                    message: format!("source and {name} have different feature columns"),
                });
            }
        }
        Ok(DomainPair {
            source,
            target,
            target_probe,
        })
    }

    /// Swap source and target (probe is dropped: it described the old target).
    pub fn swapped(&self) -> DomainPair {
        DomainPair {
            source: self.target.clone(),
            target: self.source.clone(),
            target_probe: None,
        }
    }
}

/// How to split a dataset for validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitKind {
    /// Hold out a fraction of rows (test side), train on the rest.
    Holdout { fraction: f64 },
    /// k disjoint folds.
    KFold { k: usize },
}

/// A reproducible split: kind plus the seed that drives the shuffle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
}

impl SplitSpec {
    pub fn holdout(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid("fraction", format!("{fraction} not in (0, 1)")));
        }
        Ok(SplitSpec {
            kind: SplitKind::Holdout { fraction },
            seed,
        })
    }

    pub fn kfold(k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("k", format!("{k} < 2")));
        }
        Ok(SplitSpec {
            kind: SplitKind::KFold { k },
            seed,
        })
    }

    /// Holdout: `(train_rows, held_out_rows)`, both non-empty.
    pub fn split(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        match self.kind {
            SplitKind::Holdout { fraction } => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng::rng(self.seed));
                let held = ((n as f64) * fraction).round() as usize;
                let held = held.clamp(1, n.saturating_sub(1).max(1));
                if n < 2 {
                    return Err(Error::TooFewRows {
                        context: "holdout split",
                        needed: 2,
                        got: n,
                    });
                }
                let (test, train) = idx.split_at(held);
                let mut train = train.to_vec();
                let mut test = test.to_vec();
                train.sort_unstable();
                test.sort_unstable();
                Ok((train, test))
            }
            SplitKind::KFold { .. } => Err(Error::invalid(
                "split",
                "use fold_assignments for k-fold specs",
            )),
        }
    }

    /// K-fold: fold id per row, each fold non-empty when `n ≥ k`.
    pub fn fold_assignments(&self, n: usize) -> Result<Vec<usize>> {
        match self.kind {
            SplitKind::KFold { k } => {
                if n < k {
                    return Err(Error::BadFold { k, usable: n });
                }
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng::rng(self.seed));
                let mut fold = vec![0usize; n];
                for (pos, &row) in idx.iter().enumerate() {
                    fold[row] = pos % k;
                }
                Ok(fold)
            }
            SplitKind::Holdout { .. } => Err(Error::invalid(
                "fold_assignments",
                "use split for holdout specs",
            )),
        }
    }
}

/// Load a CSV file with a header row. Every non-label column becomes a numeric
/// feature; the label column must contain exactly two distinct raw values, which
/// map to `{0, 1}` in sorted order (numeric when both parse as numbers, byte-wise
/// otherwise). Rows get unit weights. Missing or non-numeric feature cells are
/// errors — no imputation.
pub fn load_csv(path: &Path, label_column: &str) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownColumn {
            column: label_column.to_string(),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let d = feature_names.len();

    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                path: path.display().to_string(),
                message: format!(
                    "row {} has {} fields, header has {}",
                    row_idx,
                    record.len(),
                    headers.len()
                ),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                if cell.is_empty() {
                    return Err(Error::MissingValue {
                        column: label_column.to_string(),
                        row: row_idx,
                    });
                }
                raw_labels.push(cell.to_string());
            } else {
                if cell.is_empty() {
                    return Err(Error::MissingValue {
                        column: headers[j].clone(),
                        row: row_idx,
                    });
                }
                let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                    column: headers[j].clone(),
                    row: row_idx,
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteFeature { row: row_idx, col: j });
                }
                features.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut distinct: Vec<String> = raw_labels.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::LabelCardinality {
            column: label_column.to_string(),
            distinct: distinct.len(),
        });
    }
    // Sorted order of the two raw values decides the {0,1} mapping; numeric
    // comparison wins when both values parse as numbers ("2" < "10").
    let (a, b) = (&distinct[0], &distinct[1]);
    let zero_value = match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => {
            if x <= y {
                a.clone()
            } else {
                b.clone()
            }
        }
        _ => a.clone(),
    };
    let labels: Vec<u8> = raw_labels
        .iter()
        .map(|v| u8::from(*v != zero_value))
        .collect();
    debug_assert_eq!(features.len(), labels.len() * d);
    TabularDataset::with_unit_weights(features, labels, feature_names)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Balancing strategy for [`balance_by_label`] / [`balance_by_group`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceMode {
    /// Scale each side's weights so both sides carry total weight `n/2`.
    Reweight,
    /// Drop rows from the larger side (seeded, without replacement) until row
    /// counts match; output has unit weights.
    Subsample,
}

/// Balance the two label classes. See [`BalanceMode`].
pub fn balance_by_label(
    data: &TabularDataset,
    mode: BalanceMode,
    seed: u64,
) -> Result<TabularDataset> {
    let groups: Vec<u8> = data.labels().to_vec();
    balance_by(data, &groups, mode, seed)
}

/// Balance by a binary feature column (labels stay untouched): the two distinct
/// values of `group_column` play the role the classes play in
/// [`balance_by_label`].
pub fn balance_by_group(
    data: &TabularDataset,
    group_column: &str,
    mode: BalanceMode,
    seed: u64,
) -> Result<TabularDataset> {
    let j = data
        .feature_names()
        .iter()
        .position(|n| n == group_column)
        .ok_or_else(|| Error::UnknownColumn {
            column: group_column.to_string(),
        })?;
    let mut values: Vec<f64> = (0..data.n()).map(|i| data.value(i, j)).collect();
    let mut distinct = values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::GroupCardinality {
            column: group_column.to_string(),
            distinct: distinct.len(),
        });
    }
    let lo = distinct[0];
    let groups: Vec<u8> = values.drain(..).map(|v| u8::from(v != lo)).collect();
    balance_by(data, &groups, mode, seed)
}

fn balance_by(
    data: &TabularDataset,
    groups: &[u8],
    mode: BalanceMode,
    seed: u64,
) -> Result<TabularDataset> {
    let n = data.n();
    let idx0: Vec<usize> = (0..n).filter(|&i| groups[i] == 0).collect();
    let idx1: Vec<usize> = (0..n).filter(|&i| groups[i] == 1).collect();
    if idx0.is_empty() || idx1.is_empty() {
        return Err(Error::SingleClass);
    }
    match mode {
        BalanceMode::Reweight => {
            let half = n as f64 / 2.0;
            let mut weights = data.weights().to_vec();
            for side in [&idx0, &idx1] {
                let total: f64 = side.iter().map(|&i| weights[i]).sum();
                if total <= 0.0 {
                    return Err(Error::InvalidWeights);
                }
                let scale = half / total;
                for &i in side {
                    weights[i] *= scale;
                }
            }
            data.with_weights(weights)
        }
        BalanceMode::Subsample => {
            let (mut big, small) = if idx0.len() >= idx1.len() {
                (idx0, idx1)
            } else {
                (idx1, idx0)
            };
            big.shuffle(&mut rng::rng(seed));
            big.truncate(small.len());
            let mut keep: Vec<usize> = small;
            keep.extend_from_slice(&big);
            keep.sort_unstable();
            let sub = data.subset(&keep)?;
            let unit = vec![1.0; sub.n()];
            sub.with_weights(unit)
        }
    }
}

/// Generate a source→target pair with a planted conditional shift.
///
/// Source: `X ~ Uniform[0,1]^d`, `y = 1{x1 + x2 > 1}` with 5% symmetric label
/// noise. Target: fresh draw from the same X law and label rule, then labels of
/// rows inside `region` are flipped with probability `flip_prob` — a pure Y|X
/// shift confined to the region. Requires `d ≥ 2`.
pub fn synth_shift(
    n_source: usize,
    n_target: usize,
    d: usize,
    region: &Region,
    flip_prob: f64,
    seed: u64,
) -> Result<DomainPair> {
    if d < 2 {
        return Err(Error::invalid("d", format!("{d} < 2; the label rule uses x1 + x2")));
    }
    if n_source == 0 || n_target == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(Error::invalid("flip_prob", format!("{flip_prob} not in [0, 1]")));
    }
    let feature_names: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    let resolved = region.resolve(&feature_names)?;

    let draw = |n: usize, stream: u64, flip_in_region: bool| -> Result<TabularDataset> {
        let mut g = rng::rng(rng::derive(seed, stream));
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let start = features.len();
            for _ in 0..d {
                features.push(g.gen::<f64>());
            }
            let row = &features[start..start + d];
            let mut y = u8::from(row[0] + row[1] > 1.0);
            if g.gen::<f64>() < 0.05 {
                y ^= 1;
            }
            if flip_in_region
                && Region::contains_resolved(&resolved, row)
                && g.gen::<f64>() < flip_prob
            {
                y ^= 1;
            }
            labels.push(y);
        }
        TabularDataset::with_unit_weights(features, labels, feature_names.clone())
    };

    let source = draw(n_source, 1, false)?;
    let target = draw(n_target, 2, true)?;
    DomainPair::new(source, target, None)
}

/// Per-class row counts and weight totals, mostly for reporting.
pub fn class_summary(data: &TabularDataset) -> BTreeMap<u8, (usize, f64)> {
    let mut out: BTreeMap<u8, (usize, f64)> = BTreeMap::new();
    for i in 0..data.n() {
        let e = out.entry(data.label(i)).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += data.weight(i);
    }
    out
}
