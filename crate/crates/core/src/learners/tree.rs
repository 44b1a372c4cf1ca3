//! CART regression trees with weighted squared-error splitting.
//!
//! Split selection scans midpoints between consecutive distinct feature values
//! and minimises the weighted sum of child squared errors; exact ties resolve to
//! the lowest feature index, then the lowest threshold, so fits are fully
//! deterministic. Rows go left when `x[feature] < threshold`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::TabularDataset;

/// A node in the flattened tree array (root at index 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted regression tree.
///
/// `leaf_shares[i]` is the share of training weight that reached node `i`
/// (zero for internal nodes after the fit completes); it is bookkeeping for
/// region extraction, not part of the predictive function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub min_leaf: usize,
    #[serde(default)]
    pub leaf_shares: Vec<f64>,
}

/// Growth limits for [`fit_tree`].
///
/// `min_gain_frac` is an rpart-style complexity floor: a split is kept only if
/// it reduces the weighted SSE by more than `min_gain_frac × (root SSE)`. The
/// default 0.0 splits on any strict improvement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_gain_frac: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_leaf: 1,
            min_gain_frac: 0.0,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf", "must be ≥ 1"));
        }
        if !(self.min_gain_frac >= 0.0 && self.min_gain_frac.is_finite()) {
            return Err(Error::invalid(
                "min_gain_frac",
                format!("{} not ≥ 0", self.min_gain_frac),
            ));
        }
        Ok(())
    }
}

/// One leaf described as an axis-aligned cell: per-dimension `[low, high)`
/// bounds (infinite when unconstrained), the leaf prediction, and the leaf's
/// share of the training weight.
#[derive(Debug, Clone)]
pub struct LeafCell {
    pub node: usize,
    pub value: f64,
    pub bounds: Vec<(f64, f64)>,
    pub weight_share: f64,
}

impl DecisionTree {
    /// Predicted value for a feature row.
    pub fn predict_value(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Index of the leaf a row lands in.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { .. } => return idx,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Enumerate leaf cells with their axis-aligned bounds. `weight_share` is
    /// filled by `fit_tree`; trees deserialized from JSON report it as stored.
    pub fn leaf_cells(&self, d: usize) -> Vec<LeafCell> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Vec<(f64, f64)>)> =
            vec![(0, vec![(f64::NEG_INFINITY, f64::INFINITY); d])];
        while let Some((idx, bounds)) = stack.pop() {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => out.push(LeafCell {
                    node: idx,
                    value: *value,
                    bounds,
                    weight_share: self.leaf_weight_share(idx),
                }),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let mut lb = bounds.clone();
                    lb[*feature].1 = lb[*feature].1.min(*threshold);
                    let mut rb = bounds;
                    rb[*feature].0 = rb[*feature].0.max(*threshold);
                    stack.push((*right, rb));
                    stack.push((*left, lb));
                }
            }
        }
        // Depth-first with left pushed last → leaves come out left-to-right.
        out
    }

    fn leaf_weight_share(&self, idx: usize) -> f64 {
        self.leaf_shares.get(idx).copied().unwrap_or(0.0)
    }
}

/// Fit a regression tree on `response` with the dataset's features and weights.
///
/// Stops at `max_depth`, when a node has fewer than `2·min_leaf` rows, or when
/// the response is constant within the node. `response` length must equal the
/// number of rows and all values must be finite.
pub fn fit_tree(
    data: &TabularDataset,
    response: &[f64],
    params: &TreeParams,
) -> Result<DecisionTree> {
    params.validate()?;
    let n = data.n();
    if response.len() != n {
        return Err(Error::LengthMismatch {
            context: "tree response",
            expected: n,
            got: response.len(),
        });
    }
    if let Some(bad) = response.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: "fit_tree",
            message: format!("non-finite response at row {bad}"),
        });
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let total_weight: f64 = data.weights().iter().sum();
    let root_sse = node_sse(data, response, &all_rows);
    let min_gain = params.min_gain_frac * root_sse;

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut shares: Vec<f64> = Vec::new();
    // Stack of (node slot, rows, depth); slots are pre-allocated so children
    // can be linked before they are grown.
    nodes.push(TreeNode::Leaf { value: 0.0 });
    shares.push(0.0);
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, all_rows, 0)];

    while let Some((slot, rows, depth)) = stack.pop() {
        let w: f64 = rows.iter().map(|&i| data.weight(i)).sum();
        shares[slot] = if total_weight > 0.0 { w / total_weight } else { 0.0 };
        let value = node_mean(data, response, &rows);

        let constant = rows
            .iter()
            .all(|&i| response[i] == response[rows[0]]);
        let splittable =
            depth < params.max_depth && rows.len() >= 2 * params.min_leaf && !constant;
        let best = if splittable {
            best_split(data, response, &rows, params.min_leaf)
        } else {
            None
        };

        // With no gain floor any valid candidate splits (children never increase
        // SSE, and ties such as XOR's zero-gain root must still partition); a
        // positive floor prunes strictly.
        let accepted = best.filter(|split| {
            min_gain == 0.0 || split.gain(node_sse(data, response, &rows)) > min_gain
        });
        match accepted {
            Some(split) => {
                let left_slot = nodes.len();
                nodes.push(TreeNode::Leaf { value: 0.0 });
                shares.push(0.0);
                let right_slot = nodes.len();
                nodes.push(TreeNode::Leaf { value: 0.0 });
                shares.push(0.0);
                nodes[slot] = TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left: left_slot,
                    right: right_slot,
                };
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| data.value(i, split.feature) < split.threshold);
                stack.push((right_slot, right_rows, depth + 1));
                stack.push((left_slot, left_rows, depth + 1));
            }
            _ => {
                nodes[slot] = TreeNode::Leaf { value };
            }
        }
    }

    for (i, node) in nodes.iter().enumerate() {
        if matches!(node, TreeNode::Split { .. }) {
            shares[i] = 0.0;
        }
    }
    Ok(DecisionTree {
        nodes,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        leaf_shares: shares,
    })
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    children_sse: f64,
}

impl SplitCandidate {
    fn gain(&self, parent_sse: f64) -> f64 {
        parent_sse - self.children_sse
    }
}

fn node_mean(data: &TabularDataset, response: &[f64], rows: &[usize]) -> f64 {
    let mut w = 0.0;
    let mut s = 0.0;
    for &i in rows {
        w += data.weight(i);
        s += data.weight(i) * response[i];
    }
    if w > 0.0 {
        s / w
    } else {
        // All-zero-weight node: fall back to the unweighted mean.
        rows.iter().map(|&i| response[i]).sum::<f64>() / rows.len() as f64
    }
}

fn node_sse(data: &TabularDataset, response: &[f64], rows: &[usize]) -> f64 {
    let mean = node_mean(data, response, rows);
    rows.iter()
        .map(|&i| {
            let r = response[i] - mean;
            data.weight(i) * r * r
        })
        .sum()
}

/// Scan all features and midpoint thresholds; return the candidate minimising
/// the summed child SSE, first-found winning exact ties (lowest feature index,
/// then lowest threshold, because the scan runs in ascending order).
fn best_split(
    data: &TabularDataset,
    response: &[f64],
    rows: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let mut best: Option<SplitCandidate> = None;
    let mut triples: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
    for feature in 0..data.d() {
        triples.clear();
        for &i in rows {
            triples.push((data.value(i, feature), response[i], data.weight(i)));
        }
        triples.sort_by(|a, b| a.0.total_cmp(&b.0));

        let total_w: f64 = triples.iter().map(|t| t.2).sum();
        let total_s: f64 = triples.iter().map(|t| t.2 * t.1).sum();
        let total_q: f64 = triples.iter().map(|t| t.2 * t.1 * t.1).sum();

        let mut wl = 0.0;
        let mut sl = 0.0;
        let mut ql = 0.0;
        for k in 0..n - 1 {
            let (x, y, w) = triples[k];
            wl += w;
            sl += w * y;
            ql += w * y * y;
            let x_next = triples[k + 1].0;
            if x == x_next {
                continue;
            }
            let count_left = k + 1;
            let count_right = n - count_left;
            if count_left < min_leaf || count_right < min_leaf {
                continue;
            }
            let wr = total_w - wl;
            if wl <= 0.0 || wr <= 0.0 {
                continue;
            }
            let sse_left = ql - sl * sl / wl;
            let sr = total_s - sl;
            let qr = total_q - ql;
            let sse_right = qr - sr * sr / wr;
            let children = sse_left.max(0.0) + sse_right.max(0.0);
            let improves = match &best {
                None => true,
                Some(b) => children < b.children_sse,
            };
            if improves {
                best = Some(SplitCandidate {
                    feature,
                    threshold: 0.5 * (x + x_next),
                    children_sse: children,
                });
            }
        }
    }
    best
}
