//! Attribution of method performance to algorithmic design components.
//!
//! Long-format run records (one row per trained configuration per evaluation
//! domain) are aggregated by one of two designs — the best configuration per
//! (setting, domain, method) or the worst domain per (setting, method,
//! configuration) — and the chosen dependent variable is regressed on design
//! dummies: model class, ambiguity-set family, a common-scale robustness
//! radius, the conditional-shift ratio, validation type, and setting or domain
//! fixed effects. The solver is a rank-revealing QR least squares that drops
//! collinear columns by name instead of failing or silently regularising.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dro::{rescale_radius, AmbiguityKind, AmbiguitySpec};
use crate::error::{Error, Result};

/// Relative residual-norm threshold below which a column is declared a linear
/// combination of the columns before it and dropped from the regression.
const COLLINEAR_TOL: f64 = 1e-10;

/// Base model family of a recorded method. Linear is the reference category
/// and receives no dummy. Externally trained neural-network runs are ingested
/// under the `nn` tag; nothing in this crate trains them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Linear,
    Xgb,
    Nn,
}

impl ModelClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelClass::Linear => "linear",
            ModelClass::Xgb => "xgb",
            ModelClass::Nn => "nn",
        }
    }
}

impl FromStr for ModelClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelClass::Linear),
            "xgb" => Ok(ModelClass::Xgb),
            "nn" | "nn-tagged-external" => Ok(ModelClass::Nn),
            other => Err(Error::invalid(
                "model_class",
                format!("unknown model class {other:?}"),
            )),
        }
    }
}

/// How the configuration behind a record was selected. In-distribution
/// validation is the reference category and receives no dummy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationType {
    InDist,
    WorstCase,
    AverageCase,
}

impl ValidationType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationType::InDist => "in_dist",
            ValidationType::WorstCase => "worst_case",
            ValidationType::AverageCase => "average_case",
        }
    }
}

impl FromStr for ValidationType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_dist" => Ok(ValidationType::InDist),
            "worst_case" | "worst_domain" => Ok(ValidationType::WorstCase),
            "average_case" | "average_domain" => Ok(ValidationType::AverageCase),
            "target_probe" => Err(Error::invalid(
                "validation_type",
                "probe-selected runs have no dummy in the regression's closed \
                 validation-type set {in_dist, worst_case, average_case}; \
                 relabel or exclude them before attribution",
            )),
            other => Err(Error::invalid(
                "validation_type",
                format!("unknown validation type {other:?}"),
            )),
        }
    }
}

/// One benchmarked configuration evaluated on one target domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub setting_id: String,
    pub domain_id: String,
    pub method_id: String,
    pub config_id: String,
    pub model_class: ModelClass,
    /// `None` marks a plain ERM run — the reference category for every
    /// ambiguity dummy and a zero robustness radius.
    pub ambiguity_kind: Option<AmbiguityKind>,
    pub raw_radius: f64,
    pub validation_type: ValidationType,
    /// Conditional-shift share of the source→target gap for this domain.
    /// `None` flags a pair where the decomposition was unavailable.
    pub yx_ratio: Option<f64>,
    pub target_accuracy: f64,
    pub source_accuracy: f64,
}

impl RunRecord {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("target_accuracy", self.target_accuracy),
            ("source_accuracy", self.source_accuracy),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    "accuracy",
                    format!("{name} = {v} for {} lies outside [0, 1]", self.key()),
                ));
            }
        }
        if !self.raw_radius.is_finite() || self.raw_radius < 0.0 {
            return Err(Error::invalid(
                "raw_radius",
                format!("{} for {}", self.raw_radius, self.key()),
            ));
        }
        if let Some(z) = self.yx_ratio {
            if !z.is_finite() {
                return Err(Error::invalid(
                    "yx_ratio",
                    format!("non-finite ratio for {}; use an empty value to flag it", self.key()),
                ));
            }
        }
        Ok(())
    }

    fn key(&self) -> String {
        format!(
            "({}, {}, {}, {})",
            self.setting_id, self.domain_id, self.method_id, self.config_id
        )
    }

    /// Robustness radius on the common scale; zero for ERM and for set
    /// families whose size parameter has no defined common-scale mapping
    /// (their ambiguity dummy still identifies them).
    fn rescaled_radius(&self) -> Result<f64> {
        let Some(kind) = self.ambiguity_kind else {
            return Ok(0.0);
        };
        match rescale_radius(&AmbiguitySpec::new(kind, self.raw_radius)) {
            Ok(r) if r.is_finite() => Ok(r),
            Ok(r) => Err(Error::invalid(
                "raw_radius",
                format!(
                    "rescaled {kind} radius {r} for {} is not finite; \
                     regression covariates must be finite",
                    self.key()
                ),
            )),
            Err(Error::UnsupportedKind { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

/// Aggregation applied to the record table before regressing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// One row per (setting, domain, method): its highest-accuracy config.
    BestConfig,
    /// One row per (setting, method, config): its lowest accuracy over domains.
    WorstDomain,
}

/// Dependent variable of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    TargetAccuracy,
    /// Target minus source accuracy.
    PerformanceGap,
}

/// Optional ablation regressors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablations {
    /// Add the square of the rescaled radius.
    pub radius_squared: bool,
    /// Add model-class × conditional-shift-ratio interactions
    /// (best-config design only).
    pub class_ratio: bool,
}

/// A fully assembled regression problem: named columns plus the response.
#[derive(Debug, Clone)]
pub struct Design {
    pub kind: DesignKind,
    pub dependent: Dependent,
    pub names: Vec<String>,
    /// Column-major matrix; every column has `response.len()` entries.
    pub columns: Vec<Vec<f64>>,
    pub response: Vec<f64>,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    #[cfg(test)]
    fn column(&self, name: &str) -> Option<&[f64]> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[idx])
    }
}

/// Aggregate `records` under `kind` and assemble the regression matrix.
///
/// Dummy columns are emitted only for levels actually present among the kept
/// rows, so the matrix never carries all-zero indicators. Fixed effects follow
/// the reporting convention: setting dummies whenever several settings are
/// present, otherwise domain dummies (best-config design only, where a row
/// belongs to a single domain).
pub fn build_design(
    records: &[RunRecord],
    kind: DesignKind,
    dependent: Dependent,
    ablations: &Ablations,
) -> Result<Design> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for r in records {
        r.validate()?;
    }
    if ablations.class_ratio && kind == DesignKind::WorstDomain {
        return Err(Error::invalid(
            "ablations",
            "class × ratio interactions need the per-domain shift ratio, \
             which the worst-domain design aggregates away",
        ));
    }

    let kept = select_rows(records, kind);
    if kind == DesignKind::BestConfig {
        if let Some(r) = kept.iter().find(|r| r.yx_ratio.is_none()) {
            return Err(Error::invalid(
                "yx_ratio",
                format!(
                    "record {} lacks the shift ratio required by the best-config design",
                    r.key()
                ),
            ));
        }
    }

    let n = kept.len();
    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let push = |names: &mut Vec<String>, columns: &mut Vec<Vec<f64>>, name: String, col: Vec<f64>| {
        debug_assert_eq!(col.len(), n);
        names.push(name);
        columns.push(col);
    };

    push(&mut names, &mut columns, "intercept".into(), vec![1.0; n]);

    for class in [ModelClass::Xgb, ModelClass::Nn] {
        if kept.iter().any(|r| r.model_class == class) {
            let col = kept
                .iter()
                .map(|r| f64::from(r.model_class == class))
                .collect();
            push(&mut names, &mut columns, format!("model_{}", class.as_str()), col);
        }
    }

    for amb in AmbiguityKind::ALL {
        if kept.iter().any(|r| r.ambiguity_kind == Some(amb)) {
            let col = kept
                .iter()
                .map(|r| f64::from(r.ambiguity_kind == Some(amb)))
                .collect();
            push(&mut names, &mut columns, format!("amb_{amb}"), col);
        }
    }

    let radius: Vec<f64> = kept
        .iter()
        .map(|r| r.rescaled_radius())
        .collect::<Result<_>>()?;
    if ablations.radius_squared {
        let sq = radius.iter().map(|r| r * r).collect();
        push(&mut names, &mut columns, "radius_sq".into(), sq);
    }
    push(&mut names, &mut columns, "radius".into(), radius);

    if kind == DesignKind::BestConfig {
        let ratio: Vec<f64> = kept.iter().map(|r| r.yx_ratio.unwrap_or(0.0)).collect();
        if ablations.class_ratio {
            for class in [ModelClass::Xgb, ModelClass::Nn] {
                if kept.iter().any(|r| r.model_class == class) {
                    let col = kept
                        .iter()
                        .zip(&ratio)
                        .map(|(r, z)| if r.model_class == class { *z } else { 0.0 })
                        .collect();
                    push(
                        &mut names,
                        &mut columns,
                        format!("{}_yx_ratio", class.as_str()),
                        col,
                    );
                }
            }
        }
        push(&mut names, &mut columns, "yx_ratio".into(), ratio);

        for val in [ValidationType::WorstCase, ValidationType::AverageCase] {
            if kept.iter().any(|r| r.validation_type == val) {
                let col = kept
                    .iter()
                    .map(|r| f64::from(r.validation_type == val))
                    .collect();
                push(&mut names, &mut columns, format!("val_{}", val.as_str()), col);
            }
        }
    }

    let settings: Vec<&str> = distinct(kept.iter().map(|r| r.setting_id.as_str()));
    if settings.len() > 1 {
        for s in &settings[1..] {
            let col = kept.iter().map(|r| f64::from(r.setting_id == *s)).collect();
            push(&mut names, &mut columns, format!("fe_setting_{s}"), col);
        }
    } else if kind == DesignKind::BestConfig {
        let domains: Vec<&str> = distinct(kept.iter().map(|r| r.domain_id.as_str()));
        if domains.len() > 1 {
            for d in &domains[1..] {
                let col = kept.iter().map(|r| f64::from(r.domain_id == *d)).collect();
                push(&mut names, &mut columns, format!("fe_domain_{d}"), col);
            }
        }
    }

    let response = kept
        .iter()
        .map(|r| match dependent {
            Dependent::TargetAccuracy => r.target_accuracy,
            Dependent::PerformanceGap => r.target_accuracy - r.source_accuracy,
        })
        .collect();

    Ok(Design {
        kind,
        dependent,
        names,
        columns,
        response,
    })
}

/// Deterministic aggregation: group rows by the design's key, keep one record
/// per group, and return groups in sorted-key order so the result does not
/// depend on the input ordering.
fn select_rows<'a>(records: &'a [RunRecord], kind: DesignKind) -> Vec<&'a RunRecord> {
    let mut groups: BTreeMap<(&str, &str, &str), &RunRecord> = BTreeMap::new();
    for r in records {
        let key = match kind {
            DesignKind::BestConfig => (
                r.setting_id.as_str(),
                r.domain_id.as_str(),
                r.method_id.as_str(),
            ),
            DesignKind::WorstDomain => (
                r.setting_id.as_str(),
                r.method_id.as_str(),
                r.config_id.as_str(),
            ),
        };
        groups
            .entry(key)
            .and_modify(|old| {
                if beats(r, old, kind) {
                    *old = r;
                }
            })
            .or_insert(r);
    }
    groups.into_values().collect()
}

/// Strict preference order inside a group: extreme accuracy first, then a
/// lexicographic tie-break so equal accuracies pick a stable winner.
fn beats(new: &RunRecord, old: &RunRecord, kind: DesignKind) -> bool {
    match kind {
        DesignKind::BestConfig => {
            (
                -new.target_accuracy,
                new.config_id.as_str(),
                new.validation_type,
            ) < (
                -old.target_accuracy,
                old.config_id.as_str(),
                old.validation_type,
            )
        }
        DesignKind::WorstDomain => {
            (new.target_accuracy, new.domain_id.as_str())
                < (old.target_accuracy, old.domain_id.as_str())
        }
    }
}

fn distinct<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut v: Vec<&str> = items.collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Ordinary least squares fit with named collinearity handling.
#[derive(Debug, Clone, Serialize)]
pub struct OlsResult {
    /// Retained regressors, aligned with the statistic vectors below.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    /// Two-tailed p-values under t(n − rank).
    pub p_values: Vec<f64>,
    /// Columns dropped as linear combinations of earlier ones.
    pub dropped: Vec<String>,
    pub n: usize,
    pub rank: usize,
    pub r_squared: f64,
    pub adjusted_r2: f64,
}

/// Least squares via modified Gram–Schmidt QR with reorthogonalisation.
/// Columns whose residual norm falls below [`COLLINEAR_TOL`] times their
/// original norm are dropped and reported by name; the fit proceeds on the
/// retained set. Standard errors are classical (homoskedastic), with
/// n − rank residual degrees of freedom.
pub fn fit_ols(design: &Design) -> Result<OlsResult> {
    let n = design.n_rows();
    let p = design.n_cols();
    if n == 0 || p == 0 {
        return Err(Error::Design {
            message: "empty design matrix".into(),
        });
    }
    for (name, col) in design.names.iter().zip(&design.columns) {
        if col.len() != n {
            return Err(Error::LengthMismatch {
                context: "design column",
                expected: n,
                got: col.len(),
            });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Design {
                message: format!("column {name:?} contains a non-finite value"),
            });
        }
    }
    if design.response.iter().any(|v| !v.is_finite()) {
        return Err(Error::Design {
            message: "response contains a non-finite value".into(),
        });
    }

    // Rank-revealing pass: q holds orthonormal columns, r_cols[j] the
    // projections of retained column j onto q[0..j] plus its diagonal.
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut kept_idx: Vec<usize> = Vec::new();
    let mut dropped: Vec<String> = Vec::new();
    for (j, col) in design.columns.iter().enumerate() {
        let orig_norm = norm(col);
        let mut v = col.clone();
        let mut coeffs = vec![0.0; q.len()];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &v);
                coeffs[k] += c;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= c * qi;
                }
            }
        }
        let res_norm = norm(&v);
        if orig_norm == 0.0 || res_norm <= COLLINEAR_TOL * orig_norm {
            dropped.push(design.names[j].clone());
            continue;
        }
        for vi in &mut v {
            *vi /= res_norm;
        }
        coeffs.push(res_norm);
        q.push(v);
        r_cols.push(coeffs);
        kept_idx.push(j);
    }

    let rank = q.len();
    if rank == 0 {
        return Err(Error::Design {
            message: format!("every column is zero or collinear: dropped {dropped:?}"),
        });
    }

    // β from R β = Qᵀy by back-substitution.
    let qty: Vec<f64> = q.iter().map(|qk| dot(qk, &design.response)).collect();
    let mut beta = vec![0.0; rank];
    for k in (0..rank).rev() {
        let mut s = qty[k];
        for m in (k + 1)..rank {
            s -= r_cols[m][k] * beta[m];
        }
        beta[k] = s / r_cols[k][k];
    }

    let mut residuals = design.response.clone();
    for (k, &j) in kept_idx.iter().enumerate() {
        for (ri, xi) in residuals.iter_mut().zip(&design.columns[j]) {
            *ri -= beta[k] * xi;
        }
    }
    let rss: f64 = residuals.iter().map(|r| r * r).sum();

    // Centered total sum of squares when a constant column is retained,
    // uncentered otherwise.
    let has_const = kept_idx.iter().any(|&j| {
        let col = &design.columns[j];
        col[0] != 0.0 && col.iter().all(|v| *v == col[0])
    });
    let tss = if has_const {
        let mean = design.response.iter().sum::<f64>() / n as f64;
        design.response.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>()
    } else {
        design.response.iter().map(|y| y * y).sum::<f64>()
    };
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let df = n.saturating_sub(rank);
    let adjusted_r2 = if df > 0 {
        let top = if has_const { n - 1 } else { n };
        1.0 - (1.0 - r_squared) * top as f64 / df as f64
    } else {
        f64::NAN
    };

    // Classical covariance: σ² R⁻¹ R⁻ᵀ; SE_k = σ · ‖row k of R⁻¹‖.
    let rinv = invert_upper(&r_cols);
    let sigma2 = if df > 0 { rss / df as f64 } else { f64::NAN };
    let mut standard_errors = vec![f64::NAN; rank];
    let mut t_stats = vec![f64::NAN; rank];
    let mut p_values = vec![f64::NAN; rank];
    if df > 0 {
        let tdist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Numeric {
            context: "fit_ols",
            message: e.to_string(),
        })?;
        for k in 0..rank {
            let row_sq: f64 = (k..rank).map(|m| rinv[m][k] * rinv[m][k]).sum();
            let se = (sigma2 * row_sq).sqrt();
            standard_errors[k] = se;
            let t = if se > 0.0 { beta[k] / se } else { f64::INFINITY };
            t_stats[k] = t;
            p_values[k] = if t.is_finite() {
                2.0 * (1.0 - tdist.cdf(t.abs()))
            } else {
                0.0
            };
        }
    }

    Ok(OlsResult {
        names: kept_idx.iter().map(|&j| design.names[j].clone()).collect(),
        coefficients: beta,
        standard_errors,
        t_stats,
        p_values,
        dropped,
        n,
        rank,
        r_squared,
        adjusted_r2,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Invert the upper-triangular R given as per-column coefficient vectors;
/// returns the inverse in the same per-column layout.
fn invert_upper(r_cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rank = r_cols.len();
    let mut inv: Vec<Vec<f64>> = (0..rank).map(|m| vec![0.0; m + 1]).collect();
    for m in 0..rank {
        inv[m][m] = 1.0 / r_cols[m][m];
        for k in (0..m).rev() {
            let mut s = 0.0;
            for l in (k + 1)..=m {
                s += r_cols[l][k] * inv[m][l];
            }
            inv[m][k] = -s / r_cols[k][k];
        }
    }
    inv
}

/// Significance marker: `***`, `**`, `*` at the 1%, 5%, and 10% levels
/// (two-tailed), empty otherwise.
pub fn significance_stars(p: f64) -> &'static str {
    if p.is_nan() {
        ""
    } else if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else if p <= 0.10 {
        "*"
    } else {
        ""
    }
}

impl OlsResult {
    /// Render a grouped, significance-starred coefficient table. Fixed-effect
    /// dummies are summarised as present/absent rather than listed row by row;
    /// the JSON serialisation carries every coefficient.
    pub fn significance_table(&self) -> String {
        let mut sections: Vec<(&str, Vec<usize>)> = vec![
            ("Model Class", Vec::new()),
            ("Ambiguity Set", Vec::new()),
            ("Shift Pattern", Vec::new()),
            ("Validation Type", Vec::new()),
        ];
        let mut intercept: Option<usize> = None;
        let mut fe_setting = false;
        let mut fe_domain = false;
        for (k, name) in self.names.iter().enumerate() {
            match section_of(name) {
                Section::Intercept => intercept = Some(k),
                Section::Grouped(g) => sections[g].1.push(k),
                Section::FeSetting => fe_setting = true,
                Section::FeDomain => fe_domain = true,
            }
        }

        let mut out = String::new();
        out.push_str(&format!(
            "{:<28}{:>12}{:<4}{:>12}{:>10}\n",
            "Variable", "Coef", "", "(SE)", "t"
        ));
        if let Some(k) = intercept {
            out.push_str(&self.row(k, "Intercept"));
        }
        for (title, idx) in &sections {
            if idx.is_empty() {
                continue;
            }
            out.push_str(title);
            out.push('\n');
            for &k in idx {
                out.push_str(&self.row(k, &display_label(&self.names[k])));
            }
        }
        out.push_str("Fixed Effects\n");
        out.push_str(&format!(
            "  Setting: {}   Domain: {}\n",
            if fe_setting { "Yes" } else { "No" },
            if fe_domain { "Yes" } else { "No" },
        ));
        out.push_str("Overall\n");
        out.push_str(&format!(
            "  N = {}   Adjusted R2 = {:.3}\n",
            self.n, self.adjusted_r2
        ));
        if self.dropped.is_empty() {
            out.push_str("Dropped (collinear): none\n");
        } else {
            out.push_str(&format!("Dropped (collinear): {}\n", self.dropped.join(", ")));
        }
        out.push_str(
            "Notes: ***, **, * mark two-tailed significance at the 1%, 5%, and 10% levels.\n",
        );
        out
    }

    fn row(&self, k: usize, label: &str) -> String {
        format!(
            "  {:<26}{:>12.4}{:<4}{:>12}{:>10.2}\n",
            label,
            self.coefficients[k],
            significance_stars(self.p_values[k]),
            format!("({:.4})", self.standard_errors[k]),
            self.t_stats[k],
        )
    }
}

enum Section {
    Intercept,
    Grouped(usize),
    FeSetting,
    FeDomain,
}

fn section_of(name: &str) -> Section {
    if name == "intercept" {
        Section::Intercept
    } else if name.starts_with("model_") {
        Section::Grouped(0)
    } else if name.starts_with("amb_") || name == "radius" || name == "radius_sq" {
        Section::Grouped(1)
    } else if name == "yx_ratio" || name.ends_with("_yx_ratio") {
        Section::Grouped(2)
    } else if name.starts_with("val_") {
        Section::Grouped(3)
    } else if name.starts_with("fe_setting_") {
        Section::FeSetting
    } else {
        Section::FeDomain
    }
}

fn display_label(name: &str) -> String {
    match name {
        "model_xgb" => "XGB".into(),
        "model_nn" => "NN".into(),
        "amb_kl" => "Kullback-Leibler".into(),
        "amb_chi2" => "Chi-squared".into(),
        "amb_tv" => "Total Variation".into(),
        "amb_cvar" => "CVaR".into(),
        "amb_wasserstein" => "Wasserstein".into(),
        "amb_aug_wasserstein" => "Augmented Wasserstein".into(),
        "amb_satisficing_wasserstein" => "Satisficing Wasserstein".into(),
        "amb_marginal_cvar" => "Marginal CVaR".into(),
        "amb_conditional_gamma" => "Conditional Gamma".into(),
        "radius" => "Radius".into(),
        "radius_sq" => "Radius^2".into(),
        "yx_ratio" => "Y|X-ratio".into(),
        "xgb_yx_ratio" => "XGB-Y|X-ratio".into(),
        "nn_yx_ratio" => "NN-Y|X-ratio".into(),
        "val_worst_case" => "Worst-case".into(),
        "val_average_case" => "Average-case".into(),
        other => other.into(),
    }
}

/// Read run records from a long-format results CSV (the grid harness's output
/// schema). Rows whose `error_tag` is non-empty describe failed runs without
/// accuracies and are skipped. An empty `ambiguity_kind` marks ERM; an absent
/// or empty `yx_ratio` column flags the ratio as unavailable.
pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, &e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_err(path, &e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &'static str| {
        col(name).ok_or_else(|| csv_err(path, &format!("missing required column {name:?}")))
    };

    let c_setting = need("setting_id")?;
    let c_domain = need("domain_id")?;
    let c_method = need("method_id")?;
    let c_config = need("config_id")?;
    let c_class = need("model_class")?;
    let c_kind = need("ambiguity_kind")?;
    let c_radius = need("raw_radius")?;
    let c_val = need("validation_type")?;
    let c_src = need("source_acc")?;
    let c_tgt = need("target_acc")?;
    let c_err = col("error_tag");
    let c_ratio = col("yx_ratio");

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, &e.to_string()))?;
        let line = i + 2;
        let field = |c: usize| row.get(c).unwrap_or("");
        if let Some(c) = c_err {
            if !field(c).is_empty() {
                continue;
            }
        }
        let number = |c: usize, what: &str| -> Result<f64> {
            field(c)
                .parse::<f64>()
                .map_err(|_| csv_err(path, &format!("line {line}: bad {what} {:?}", field(c))))
        };
        let ambiguity_kind = match field(c_kind) {
            "" => None,
            s => Some(AmbiguityKind::from_str(s)?),
        };
        let yx_ratio = match c_ratio.map(field) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<f64>().map_err(|_| {
                csv_err(path, &format!("line {line}: bad yx_ratio {s:?}"))
            })?),
        };
        let raw_radius = match field(c_radius) {
            "" => 0.0,
            _ => number(c_radius, "raw_radius")?,
        };
        records.push(RunRecord {
            setting_id: field(c_setting).to_string(),
            domain_id: field(c_domain).to_string(),
            method_id: field(c_method).to_string(),
            config_id: field(c_config).to_string(),
            model_class: ModelClass::from_str(field(c_class))?,
            ambiguity_kind,
            raw_radius,
            validation_type: ValidationType::from_str(field(c_val))?,
            yx_ratio,
            source_accuracy: number(c_src, "source_acc")?,
            target_accuracy: number(c_tgt, "target_acc")?,
        });
    }
    Ok(records)
}

fn csv_err(path: &Path, message: &str) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}
