//! Grid search over method configurations with four validation modes.
//!
//! One call covers one setting: a single source domain paired with one or
//! more target domains. Every configuration of every method is trained once
//! on the source's training split and evaluated everywhere; the best
//! configuration per method is then selected by held-out source accuracy, a
//! small labeled target probe, the worst target domain, or the average over
//! target domains. Training failures become rows tagged with an error instead
//! of aborting the run, so a long grid survives individual bad cells.
//!
//! The emitted long-format record table is the ingestion format of the
//! attribution regression (one row per configuration per target domain).

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

use crate::dro::{train_for_spec, AmbiguityKind, AmbiguitySpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::{
    accuracy, evaluate, EvalMetric, FittedModel, GbtConfig, LearnerSpec, LossKind, TrainConfig,
};
use crate::rng;
use crate::tabular::{DomainPair, SplitSpec, TabularDataset};

/// Default number of labeled target rows drawn for probe-based selection.
pub const DEFAULT_PROBE_SIZE: usize = 500;

/// Default fraction of source rows held out for in-distribution selection.
pub const DEFAULT_HOLDOUT_FRAC: f64 = 0.25;

/// One cell of a method's hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GridPoint {
    /// Plain empirical risk minimisation of a linear classifier.
    ErmLinear { loss: LossKind, cfg: TrainConfig },
    /// Gradient-boosted tree ensemble (the `xgb` model class in reports).
    ErmTree { cfg: GbtConfig },
    /// Distributionally robust linear training under an ambiguity set.
    Dro {
        loss: LossKind,
        spec: AmbiguitySpec,
        cfg: TrainConfig,
    },
}

impl GridPoint {
    /// Model-class tag recorded for the attribution regression.
    pub fn model_class(&self) -> &'static str {
        match self {
            GridPoint::ErmLinear { .. } | GridPoint::Dro { .. } => "linear",
            GridPoint::ErmTree { .. } => "xgb",
        }
    }

    fn family(&self) -> &'static str {
        match self {
            GridPoint::ErmLinear { .. } => "erm_linear",
            GridPoint::ErmTree { .. } => "erm_tree",
            GridPoint::Dro { .. } => "dro",
        }
    }

    /// The ambiguity set of a DRO point, if any.
    pub fn ambiguity(&self) -> Option<&AmbiguitySpec> {
        match self {
            GridPoint::Dro { spec, .. } => Some(spec),
            _ => None,
        }
    }

    fn fit(&self, data: &TabularDataset, seed: u64) -> Result<FittedModel> {
        match self {
            GridPoint::ErmLinear { loss, cfg } => LearnerSpec::Linear {
                loss: *loss,
                cfg: cfg.clone(),
            }
            .fit(data, seed),
            GridPoint::ErmTree { cfg } => LearnerSpec::Gbt(cfg.clone()).fit(data, seed),
            GridPoint::Dro { loss, spec, cfg } => {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                Ok(FittedModel::Linear(
                    train_for_spec(data, spec, &cfg, *loss)?.model,
                ))
            }
        }
    }
}

/// A method: an identifier plus a non-empty, family-homogeneous grid.
/// Deserialized specs are re-validated by [`run_grid`] before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method_id: String,
    pub points: Vec<GridPoint>,
}

impl MethodSpec {
    pub fn new(method_id: impl Into<String>, points: Vec<GridPoint>) -> Result<Self> {
        let spec = MethodSpec {
            method_id: method_id.into(),
            points,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        csv_safe("method_id", &self.method_id)?;
        if self.points.is_empty() {
            return Err(Error::invalid(
                "grid",
                format!("method {:?} has an empty hyperparameter grid", self.method_id),
            ));
        }
        let family = self.points[0].family();
        if let Some(stray) = self.points.iter().find(|p| p.family() != family) {
            return Err(Error::invalid(
                "grid",
                format!(
                    "method {:?} mixes families {} and {}; one family per method",
                    self.method_id,
                    family,
                    stray.family()
                ),
            ));
        }
        Ok(())
    }
}

/// How the best configuration of each method is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Highest accuracy on the held-out source split.
    InDist,
    /// Highest accuracy on a small labeled sample of the (single) target.
    TargetProbe,
    /// Highest worst-case accuracy over all target domains.
    WorstDomain,
    /// Highest mean accuracy over all target domains.
    AverageDomain,
}

impl ValidationMode {
    pub const ALL: [ValidationMode; 4] = [
        ValidationMode::InDist,
        ValidationMode::TargetProbe,
        ValidationMode::WorstDomain,
        ValidationMode::AverageDomain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationMode::InDist => "in_dist",
            ValidationMode::TargetProbe => "target_probe",
            ValidationMode::WorstDomain => "worst_domain",
            ValidationMode::AverageDomain => "average_domain",
        }
    }
}

impl FromStr for ValidationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ValidationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("mode", format!("unknown validation mode {s:?}")))
    }
}

/// Run-level options; the defaults suit small benchmark settings.
#[derive(Debug, Clone)]
pub struct GridOptions {
    pub setting_id: String,
    /// One id per pair; left empty they become `d0`, `d1`, …
    pub domain_ids: Vec<String>,
    /// Probe rows drawn from the target when the pair carries no explicit
    /// probe dataset (target-probe mode only).
    pub probe_size: usize,
    /// Source fraction held out for in-distribution selection.
    pub holdout_frac: f64,
    /// Conditional-shift ratio per pair, copied onto every record of that
    /// domain; compute it upstream with the decomposition diagnostics. Leave
    /// empty to flag the ratio as unavailable.
    pub yx_ratios: Vec<Option<f64>>,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            setting_id: "s0".into(),
            domain_ids: Vec::new(),
            probe_size: DEFAULT_PROBE_SIZE,
            holdout_frac: DEFAULT_HOLDOUT_FRAC,
            yx_ratios: Vec::new(),
        }
    }
}

/// One configuration evaluated on one target domain — or its failure record.
/// `None` metrics appear exactly when `error_tag` is set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRecord {
    pub setting_id: String,
    pub domain_id: String,
    pub method_id: String,
    pub config_id: String,
    pub model_class: &'static str,
    pub ambiguity_kind: Option<AmbiguityKind>,
    pub raw_radius: f64,
    pub validation_type: ValidationMode,
    pub source_acc: Option<f64>,
    pub target_acc: Option<f64>,
    pub macro_f1: Option<f64>,
    pub error_tag: Option<String>,
    pub yx_ratio: Option<f64>,
}

/// Header of the long-format results CSV.
pub const CSV_HEADER: &str = "setting_id,domain_id,method_id,config_id,model_class,\
ambiguity_kind,raw_radius,validation_type,source_acc,target_acc,macro_f1,error_tag,yx_ratio";

impl GridRecord {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.setting_id,
            self.domain_id,
            self.method_id,
            self.config_id,
            self.model_class,
            self.ambiguity_kind.map(|k| k.as_str()).unwrap_or(""),
            self.raw_radius,
            self.validation_type.as_str(),
            opt(self.source_acc),
            opt(self.target_acc),
            opt(self.macro_f1),
            self.error_tag.as_deref().unwrap_or(""),
            opt(self.yx_ratio),
        )
    }
}

/// Render records as the long-format CSV (header + one row per record).
pub fn records_to_csv(records: &[GridRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Write the records CSV to `path`.
pub fn write_records_csv(records: &[GridRecord], path: &Path) -> Result<()> {
    std::fs::write(path, records_to_csv(records)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// The winning configuration of one method under the run's validation mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub method_id: String,
    pub mode: ValidationMode,
    /// `None` when every configuration of the method failed to train.
    pub config_id: Option<String>,
    /// Criterion value attained by the winner.
    pub score: Option<f64>,
}

/// Everything a grid run produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOutcome {
    pub records: Vec<GridRecord>,
    pub selections: Vec<Selection>,
}

/// Per-cell training + evaluation result, kept in grid order.
enum CellEval {
    Fit {
        source_acc: f64,
        probe_acc: Option<f64>,
        per_domain: Vec<(f64, f64)>, // (target accuracy, macro F1)
    },
    Failed(String),
}

/// Train every configuration of every method on the shared source and
/// evaluate it on each target domain, then select the best configuration per
/// method under `mode`.
///
/// All pairs must share one source dataset (one setting = one source, many
/// target domains). Configurations run in parallel; records are merged in
/// grid order (method, config, domain), so the output is deterministic under
/// a fixed seed regardless of scheduling.
pub fn run_grid(
    pairs: &[DomainPair],
    methods: &[MethodSpec],
    mode: ValidationMode,
    opts: &GridOptions,
    seed: u64,
) -> Result<GridOutcome> {
    if pairs.is_empty() {
        return Err(Error::invalid("pairs", "no domain pairs supplied"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("methods", "no methods supplied"));
    }
    for m in methods {
        m.validate()?;
    }
    csv_safe("setting_id", &opts.setting_id)?;

    let source = &pairs[0].source;
    for (j, p) in pairs.iter().enumerate().skip(1) {
        if p.source != pairs[0].source {
            return Err(Error::DomainMismatch {
                message: format!(
                    "pair {j} has a different source; a grid run covers one setting \
                     with a single shared source"
                ),
            });
        }
    }
    for (j, p) in pairs.iter().enumerate() {
        if p.target.d() != source.d() {
            return Err(Error::DomainMismatch {
                message: format!(
                    "target {j} has dimension {}, source has {}",
                    p.target.d(),
                    source.d()
                ),
            });
        }
    }

    let domain_ids: Vec<String> = if opts.domain_ids.is_empty() {
        (0..pairs.len()).map(|j| format!("d{j}")).collect()
    } else if opts.domain_ids.len() == pairs.len() {
        opts.domain_ids.clone()
    } else {
        return Err(Error::LengthMismatch {
            context: "domain_ids",
            expected: pairs.len(),
            got: opts.domain_ids.len(),
        });
    };
    for id in &domain_ids {
        csv_safe("domain_id", id)?;
    }
    let yx_ratios: Vec<Option<f64>> = if opts.yx_ratios.is_empty() {
        vec![None; pairs.len()]
    } else if opts.yx_ratios.len() == pairs.len() {
        opts.yx_ratios.clone()
    } else {
        return Err(Error::LengthMismatch {
            context: "yx_ratios",
            expected: pairs.len(),
            got: opts.yx_ratios.len(),
        });
    };

    // Held-out source split for in-distribution selection and the reported
    // source accuracy.
    let (train_idx, held_idx) =
        SplitSpec::holdout(opts.holdout_frac, rng::derive(seed, 1))?.split(source.n())?;
    let train_src = source.subset(&train_idx)?;
    let held_src = source.subset(&held_idx)?;
    if train_src.labels().iter().all(|&y| y == train_src.label(0)) {
        return Err(Error::SingleClass);
    }

    // Probe for target-probe selection: the pair's own probe when present,
    // otherwise a without-replacement sample of the target.
    let probe: Option<TabularDataset> = if mode == ValidationMode::TargetProbe {
        if pairs.len() != 1 {
            return Err(Error::invalid(
                "mode",
                "target_probe selection needs a single target domain; \
                 use worst_domain or average_domain for multi-target settings",
            ));
        }
        Some(match &pairs[0].target_probe {
            Some(p) => p.clone(),
            None => draw_probe(&pairs[0].target, opts.probe_size, rng::derive(seed, 2))?,
        })
    } else {
        None
    };

    let cells: Vec<(usize, usize)> = methods
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..m.points.len()).map(move |ci| (mi, ci)))
        .collect();

    let evals: Vec<CellEval> = exec::par_map(&cells, |&(mi, ci)| {
        let point = &methods[mi].points[ci];
        let cell_seed = rng::derive(seed, 16 + ((mi as u64) << 24 | ci as u64));
        match point.fit(&train_src, cell_seed) {
            Ok(model) => {
                let per_domain = pairs
                    .iter()
                    .map(|p| {
                        (
                            accuracy(&model, &p.target),
                            evaluate(&model, &p.target, EvalMetric::MacroF1),
                        )
                    })
                    .collect();
                CellEval::Fit {
                    source_acc: accuracy(&model, &held_src),
                    probe_acc: probe.as_ref().map(|p| accuracy(&model, p)),
                    per_domain,
                }
            }
            Err(e) => CellEval::Failed(error_tag(&e)),
        }
    });

    let mut records = Vec::with_capacity(cells.len() * pairs.len());
    for (&(mi, ci), eval) in cells.iter().zip(&evals) {
        let point = &methods[mi].points[ci];
        let (kind, raw_radius) = match point.ambiguity() {
            Some(spec) => (Some(spec.kind), spec.radius),
            None => (None, 0.0),
        };
        for (j, _) in pairs.iter().enumerate() {
            let (source_acc, target_acc, macro_f1, error_tag) = match eval {
                CellEval::Fit {
                    source_acc,
                    per_domain,
                    ..
                } => (
                    Some(*source_acc),
                    Some(per_domain[j].0),
                    Some(per_domain[j].1),
                    None,
                ),
                CellEval::Failed(tag) => (None, None, None, Some(tag.clone())),
            };
            records.push(GridRecord {
                setting_id: opts.setting_id.clone(),
                domain_id: domain_ids[j].clone(),
                method_id: methods[mi].method_id.clone(),
                config_id: format!("c{ci}"),
                model_class: point.model_class(),
                ambiguity_kind: kind,
                raw_radius,
                validation_type: mode,
                source_acc,
                target_acc,
                macro_f1,
                error_tag,
                yx_ratio: yx_ratios[j],
            });
        }
    }

    let mut selections = Vec::with_capacity(methods.len());
    for (mi, m) in methods.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (ci, _) in m.points.iter().enumerate() {
            let cell = cells.iter().position(|&c| c == (mi, ci)).expect("cell exists");
            let score = match &evals[cell] {
                CellEval::Failed(_) => continue,
                CellEval::Fit {
                    source_acc,
                    probe_acc,
                    per_domain,
                } => match mode {
                    ValidationMode::InDist => *source_acc,
                    ValidationMode::TargetProbe => probe_acc.expect("probe built for this mode"),
                    ValidationMode::WorstDomain => per_domain
                        .iter()
                        .map(|(a, _)| *a)
                        .fold(f64::INFINITY, f64::min),
                    ValidationMode::AverageDomain => {
                        per_domain.iter().map(|(a, _)| *a).sum::<f64>()
                            / per_domain.len() as f64
                    }
                },
            };
            // Strict improvement only: earlier configs win ties.
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((ci, score));
            }
        }
        selections.push(Selection {
            method_id: m.method_id.clone(),
            mode,
            config_id: best.map(|(ci, _)| format!("c{ci}")),
            score: best.map(|(_, s)| s),
        });
    }

    Ok(GridOutcome {
        records,
        selections,
    })
}

/// Sample a labeled probe of up to `size` rows from `target` without
/// replacement.
fn draw_probe(target: &TabularDataset, size: usize, seed: u64) -> Result<TabularDataset> {
    if size == 0 {
        return Err(Error::invalid("probe_size", "probe needs at least one row"));
    }
    if size >= target.n() {
        return Ok(target.clone());
    }
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..target.n()).collect();
    idx.shuffle(&mut rng::rng(seed));
    idx.truncate(size);
    idx.sort_unstable();
    target.subset(&idx)
}

/// Flatten an error into a single CSV-safe tag.
fn error_tag(e: &Error) -> String {
    e.to_string().replace([',', '\n'], ";")
}

fn csv_safe(name: &'static str, value: &str) -> Result<()> {
    if value.is_empty() || value.contains([',', '\n', '"']) {
        return Err(Error::invalid(
            name,
            format!("{value:?} must be non-empty and free of commas, quotes, and newlines"),
        ));
    }
    Ok(())
}
