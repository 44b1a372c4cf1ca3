//! Ambiguity sets and distributionally robust training of linear classifiers.
//!
//! An [`AmbiguitySpec`] names a neighbourhood of the empirical training
//! distribution; every trainer here minimises the supremum of the weighted
//! loss over that neighbourhood:
//!
//! - f-divergence balls (`kl`, `chi2`, `tv`, `cvar`) — [`train_f_dro`] runs the
//!   shared subgradient stepper on Danskin subgradients at the exact inner
//!   maximiser from [`inner_worst_case`];
//! - Wasserstein balls over feature perturbations (`wasserstein`,
//!   `aug_wasserstein`) — [`train_wasserstein`] minimises the exact hinge-loss
//!   reformulation (empirical hinge plus a radius-scaled dual norm), with
//!   per-feature transport costs that can mark individual features as
//!   unperturbable;
//! - the satisficing variant (`satisficing_wasserstein`) — [`train_satisficing`]
//!   searches for the largest radius whose robust optimum stays within a
//!   multiplicative budget of the empirical optimum;
//! - subpopulation sets over a feature subset Z (`marginal_cvar`,
//!   `conditional_gamma`) — [`train_marginal_dro`] reweights whole Z-groups,
//!   [`train_conditional_dro`] retilts label weights inside each Z-cell.
//!
//! [`rescale_radius`] maps radii of different families onto a comparable scale
//! for cross-method regressions.

mod groups;
mod inner;
mod wasserstein;

pub use groups::{train_conditional_dro, train_marginal_dro};
pub use inner::inner_worst_case;
pub(crate) use inner::{solve_cvar, worst_case_unchecked};
pub use wasserstein::{
    train_satisficing, train_wasserstein, train_wasserstein_with_coords, WassersteinFit,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::learners::{descend, LinearModel, LinearProblem, LossKind, StepEval, TrainConfig};
use crate::tabular::TabularDataset;

/// Families of ambiguity sets. The meaning of [`AmbiguitySpec::radius`] depends
/// on the kind: ε ≥ 0 for the divergence and Wasserstein balls, the tail level
/// α ∈ (0,1] for `cvar`/`marginal_cvar` (plain `cvar` also accepts α = 0 as the
/// essential-supremum limit), and the odds bound Γ ≥ 1 for `conditional_gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityKind {
    Kl,
    Chi2,
    Tv,
    Cvar,
    Wasserstein,
    AugWasserstein,
    SatisficingWasserstein,
    MarginalCvar,
    ConditionalGamma,
}

impl AmbiguityKind {
    pub const ALL: [AmbiguityKind; 9] = [
        AmbiguityKind::Kl,
        AmbiguityKind::Chi2,
        AmbiguityKind::Tv,
        AmbiguityKind::Cvar,
        AmbiguityKind::Wasserstein,
        AmbiguityKind::AugWasserstein,
        AmbiguityKind::SatisficingWasserstein,
        AmbiguityKind::MarginalCvar,
        AmbiguityKind::ConditionalGamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AmbiguityKind::Kl => "kl",
            AmbiguityKind::Chi2 => "chi2",
            AmbiguityKind::Tv => "tv",
            AmbiguityKind::Cvar => "cvar",
            AmbiguityKind::Wasserstein => "wasserstein",
            AmbiguityKind::AugWasserstein => "aug_wasserstein",
            AmbiguityKind::SatisficingWasserstein => "satisficing_wasserstein",
            AmbiguityKind::MarginalCvar => "marginal_cvar",
            AmbiguityKind::ConditionalGamma => "conditional_gamma",
        }
    }

    /// Kinds solved by the exact reweighting inner solver.
    pub fn is_f_divergence(self) -> bool {
        matches!(
            self,
            AmbiguityKind::Kl | AmbiguityKind::Chi2 | AmbiguityKind::Tv | AmbiguityKind::Cvar
        )
    }

    /// Kinds trained through the Wasserstein hinge reformulation.
    pub fn is_wasserstein_family(self) -> bool {
        matches!(
            self,
            AmbiguityKind::Wasserstein
                | AmbiguityKind::AugWasserstein
                | AmbiguityKind::SatisficingWasserstein
        )
    }
}

impl fmt::Display for AmbiguityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AmbiguityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AmbiguityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("kind", format!("unknown ambiguity kind {s:?}")))
    }
}

/// A fully specified ambiguity set.
///
/// `cost_scale` holds the per-feature transport costs v (diagonal Mahalanobis
/// Σ = diag(v)) for the Wasserstein kinds; an entry of `+∞` (spelled `inf` in
/// the CLI configuration format) marks a feature the adversary may not perturb,
/// and an empty vector means unit costs everywhere. `z_features` names the
/// feature subset defining the groups of the marginal/conditional kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub kind: AmbiguityKind,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_ratio: Option<f64>,
    #[serde(default, with = "scale_serde", skip_serializing_if = "Vec::is_empty")]
    pub cost_scale: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub z_features: Vec<usize>,
}

impl AmbiguitySpec {
    /// A spec with only kind and radius set; other fields default to empty.
    pub fn new(kind: AmbiguityKind, radius: f64) -> Self {
        AmbiguitySpec {
            kind,
            radius,
            label_cost: None,
            target_ratio: None,
            cost_scale: Vec::new(),
            z_features: Vec::new(),
        }
    }

    pub fn with_label_cost(mut self, kappa: f64) -> Self {
        self.label_cost = Some(kappa);
        self
    }

    pub fn with_target_ratio(mut self, tau: f64) -> Self {
        self.target_ratio = Some(tau);
        self
    }

    pub fn with_cost_scale(mut self, v: Vec<f64>) -> Self {
        self.cost_scale = v;
        self
    }

    pub fn with_z_features(mut self, z: Vec<usize>) -> Self {
        self.z_features = z;
        self
    }

    /// Check the radius against the range its kind requires.
    pub(crate) fn validate_radius(&self) -> Result<()> {
        let r = self.radius;
        let ok = match self.kind {
            AmbiguityKind::Kl
            | AmbiguityKind::Chi2
            | AmbiguityKind::Tv
            | AmbiguityKind::Wasserstein
            | AmbiguityKind::AugWasserstein
            | AmbiguityKind::SatisficingWasserstein => r.is_finite() && r >= 0.0,
            AmbiguityKind::Cvar => r.is_finite() && (0.0..=1.0).contains(&r),
            AmbiguityKind::MarginalCvar => r.is_finite() && r > 0.0 && r <= 1.0,
            AmbiguityKind::ConditionalGamma => r >= 1.0 && !r.is_nan(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "radius",
                format!("{r} is out of range for kind {}", self.kind),
            ))
        }
    }

    /// Full validation against a dataset with `d` features.
    pub fn validate(&self, d: usize) -> Result<()> {
        self.validate_radius()?;
        if self.kind == AmbiguityKind::AugWasserstein {
            match self.label_cost {
                Some(k) if k > 0.0 && k.is_finite() => {}
                other => {
                    return Err(Error::invalid(
                        "label_cost",
                        format!("aug_wasserstein requires a finite κ > 0, got {other:?}"),
                    ))
                }
            }
        }
        if self.kind == AmbiguityKind::SatisficingWasserstein {
            match self.target_ratio {
                Some(t) if t > 1.0 && t.is_finite() => {}
                other => {
                    return Err(Error::invalid(
                        "target_ratio",
                        format!("satisficing requires a finite τ > 1, got {other:?}"),
                    ))
                }
            }
        }
        if matches!(
            self.kind,
            AmbiguityKind::MarginalCvar | AmbiguityKind::ConditionalGamma
        ) {
            if self.z_features.is_empty() {
                return Err(Error::invalid("z_features", "must name at least one feature"));
            }
            if let Some(&bad) = self.z_features.iter().find(|&&j| j >= d) {
                return Err(Error::invalid(
                    "z_features",
                    format!("feature index {bad} out of range for d = {d}"),
                ));
            }
        }
        if !self.cost_scale.is_empty() {
            if !self.kind.is_wasserstein_family() {
                return Err(Error::invalid(
                    "cost_scale",
                    format!("only meaningful for wasserstein kinds, not {}", self.kind),
                ));
            }
            if self.cost_scale.len() != d {
                return Err(Error::LengthMismatch {
                    context: "cost_scale",
                    expected: d,
                    got: self.cost_scale.len(),
                });
            }
            if let Some(bad) = self
                .cost_scale
                .iter()
                .position(|v| v.is_nan() || *v < 0.0)
            {
                return Err(Error::invalid(
                    "cost_scale",
                    format!("entry {bad} must be ≥ 0 or inf"),
                ));
            }
        }
        Ok(())
    }
}

/// Serialize per-feature cost scales with `+∞` spelled as the string `"inf"`,
/// so specs survive JSON round-trips.
mod scale_serde {
    use serde::de::{self, SeqAccess, Visitor};
    use serde::ser::SerializeSeq;
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for &x in v {
            if x.is_infinite() {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element(&x)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<f64>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<f64>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a sequence of numbers or \"inf\"")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                #[derive(serde::Deserialize)]
                #[serde(untagged)]
                enum Entry {
                    Num(f64),
                    Word(String),
                }
                let mut out = Vec::new();
                while let Some(e) = seq.next_element::<Entry>()? {
                    out.push(match e {
                        Entry::Num(x) => x,
                        Entry::Word(w) if w.eq_ignore_ascii_case("inf") => f64::INFINITY,
                        Entry::Word(w) => {
                            return Err(de::Error::custom(format!(
                                "cost_scale entry {w:?} is neither a number nor \"inf\""
                            )))
                        }
                    });
                }
                Ok(out)
            }
        }
        d.deserialize_seq(V)
    }
}

/// The maximising reweighting of the training points and the value it attains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseWeights {
    pub weights: Vec<f64>,
    pub attained_value: f64,
}

/// Map radii of different set families onto one comparable scale:
/// √ε for the Wasserstein kinds, 2ε for KL and χ², ε for TV, and ln(1/α)
/// for CVaR. Errors on kinds without a defined rescaling.
pub fn rescale_radius(spec: &AmbiguitySpec) -> Result<f64> {
    match spec.kind {
        AmbiguityKind::Wasserstein | AmbiguityKind::AugWasserstein => Ok(spec.radius.sqrt()),
        AmbiguityKind::Kl | AmbiguityKind::Chi2 => Ok(2.0 * spec.radius),
        AmbiguityKind::Tv => Ok(spec.radius),
        AmbiguityKind::Cvar => Ok((1.0 / spec.radius).ln()),
        AmbiguityKind::SatisficingWasserstein
        | AmbiguityKind::MarginalCvar
        | AmbiguityKind::ConditionalGamma => Err(Error::UnsupportedKind {
            kind: spec.kind.as_str(),
            operation: "rescale_radius",
        }),
    }
}

/// Robustly train a linear classifier over an f-divergence ball by iterating
/// the exact inner maximiser with Danskin subgradient steps. The empirical-risk
/// solution is always evaluated as a fallback candidate, so the returned
/// model's robust objective never exceeds the ERM model's.
pub fn train_f_dro(
    data: &TabularDataset,
    spec: &AmbiguitySpec,
    cfg: &TrainConfig,
    loss_kind: LossKind,
) -> Result<LinearModel> {
    let (model, _) = train_f_dro_with_objective(data, spec, cfg, loss_kind)?;
    Ok(model)
}

/// Like [`train_f_dro`] but also reports the achieved robust objective
/// (worst-case weighted loss plus the l2 penalty).
pub fn train_f_dro_with_objective(
    data: &TabularDataset,
    spec: &AmbiguitySpec,
    cfg: &TrainConfig,
    loss_kind: LossKind,
) -> Result<(LinearModel, f64)> {
    if !spec.kind.is_f_divergence() {
        return Err(Error::UnsupportedKind {
            kind: spec.kind.as_str(),
            operation: "train_f_dro",
        });
    }
    spec.validate(data.d())?;
    let problem = LinearProblem::new(data, loss_kind)?;
    let d = data.d();
    let kind = spec.kind;
    let radius = spec.radius;

    let robust_step = |w: &[f64], b: f64| -> StepEval {
        let scores = problem.scores(w, b);
        let losses = problem.losses(&scores);
        if losses.iter().any(|l| !l.is_finite()) {
            return StepEval {
                objective: f64::INFINITY,
                grad_w: vec![0.0; d],
                grad_b: 0.0,
            };
        }
        let (q, _) = worst_case_unchecked(&losses, &problem.base, kind, radius);
        problem.weighted_eval(&q, &scores, &losses)
    };

    let outcome = descend(d, cfg, |w, b| robust_step(w, b))?;
    let erm = descend(d, cfg, |w, b| {
        let scores = problem.scores(w, b);
        let losses = problem.losses(&scores);
        problem.weighted_eval(&problem.base, &scores, &losses)
    })?;
    let penalty = |w: &[f64]| 0.5 * cfg.l2 * w.iter().map(|v| v * v).sum::<f64>();
    let erm_robust_total = robust_step(&erm.w, erm.b).objective + penalty(&erm.w);

    let (w, b, total) = if erm_robust_total < outcome.objective_total {
        (erm.w, erm.b, erm_robust_total)
    } else {
        (outcome.w, outcome.b, outcome.objective_total)
    };
    Ok((
        LinearModel {
            coefficients: w,
            intercept: b,
            loss_kind,
        },
        total,
    ))
}

/// Worst-case weighted loss of a fixed linear model over an f-divergence ball,
/// plus an optional l2 penalty — the quantity [`train_f_dro`] minimises.
pub fn robust_linear_objective(
    data: &TabularDataset,
    model: &LinearModel,
    spec: &AmbiguitySpec,
    l2: f64,
) -> Result<f64> {
    spec.validate(data.d())?;
    let problem = LinearProblem::new(data, model.loss_kind)?;
    let scores = problem.scores(&model.coefficients, model.intercept);
    let losses = problem.losses(&scores);
    let wc = inner_worst_case(&losses, &problem.base, spec)?;
    let penalty = 0.5 * l2 * model.coefficients.iter().map(|v| v * v).sum::<f64>();
    Ok(wc.attained_value + penalty)
}

/// A trained robust model with the bookkeeping the grid harness needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustFit {
    pub model: LinearModel,
    /// True when a Wasserstein spec had no perturbable coordinate and the fit
    /// degenerated to plain ERM despite a positive radius.
    pub degenerate: bool,
    /// The radius found by the satisficing search, when that kind ran.
    pub achieved_radius: Option<f64>,
}

/// Train under any supported ambiguity kind. The Wasserstein, satisficing,
/// marginal, and conditional kinds are hinge-only; `loss_kind` selects the
/// surrogate for the f-divergence kinds.
pub fn train_for_spec(
    data: &TabularDataset,
    spec: &AmbiguitySpec,
    cfg: &TrainConfig,
    loss_kind: LossKind,
) -> Result<RobustFit> {
    let hinge_only = |op: &'static str| -> Result<()> {
        if loss_kind != LossKind::Hinge {
            return Err(Error::invalid(
                "loss",
                format!("{op} supports the hinge loss only"),
            ));
        }
        Ok(())
    };
    match spec.kind {
        AmbiguityKind::Kl | AmbiguityKind::Chi2 | AmbiguityKind::Tv | AmbiguityKind::Cvar => {
            let model = train_f_dro(data, spec, cfg, loss_kind)?;
            Ok(RobustFit {
                model,
                degenerate: false,
                achieved_radius: None,
            })
        }
        AmbiguityKind::Wasserstein | AmbiguityKind::AugWasserstein => {
            hinge_only("wasserstein training")?;
            let fit = train_wasserstein(data, spec, cfg)?;
            Ok(RobustFit {
                model: fit.model,
                degenerate: fit.degenerate,
                achieved_radius: None,
            })
        }
        AmbiguityKind::SatisficingWasserstein => {
            hinge_only("satisficing training")?;
            spec.validate(data.d())?;
            let tau = spec.target_ratio.expect("validated above");
            let (model, achieved) =
                wasserstein::train_satisficing_scaled(data, tau, &spec.cost_scale, cfg)?;
            Ok(RobustFit {
                model,
                degenerate: false,
                achieved_radius: Some(achieved),
            })
        }
        AmbiguityKind::MarginalCvar => {
            hinge_only("marginal-DRO training")?;
            spec.validate(data.d())?;
            let model = train_marginal_dro(data, &spec.z_features, spec.radius, cfg)?;
            Ok(RobustFit {
                model,
                degenerate: false,
                achieved_radius: None,
            })
        }
        AmbiguityKind::ConditionalGamma => {
            hinge_only("conditional-DRO training")?;
            spec.validate(data.d())?;
            let model = train_conditional_dro(data, &spec.z_features, spec.radius, cfg)?;
            Ok(RobustFit {
                model,
                degenerate: false,
                achieved_radius: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit_linear, fit_linear_with_objective};
    use crate::region::Region;
    use crate::tabular::synth_shift;
    use std::str::FromStr;

    fn synthetic(n: usize, seed: u64) -> TabularDataset {
        let region = Region::from_constraints(vec![]);
        let pair = synth_shift(n, 8, 2, &region, 0.0, seed).unwrap();
        pair.source
    }

    #[test]
    fn rescale_radius_exact_values() {
        use AmbiguityKind::*;
        let cases: [(AmbiguityKind, f64, f64); 25] = [
            (Wasserstein, 0.04, 0.2),
            (Wasserstein, 1.0, 1.0),
            (Wasserstein, 0.25, 0.5),
            (Wasserstein, 4.0, 2.0),
            (Wasserstein, 0.0, 0.0),
            (AugWasserstein, 0.04, 0.2),
            (AugWasserstein, 0.09, 0.3),
            (AugWasserstein, 1.0, 1.0),
            (AugWasserstein, 0.16, 0.4),
            (AugWasserstein, 2.25, 1.5),
            (Kl, 0.1, 0.2),
            (Kl, 0.0, 0.0),
            (Kl, 0.5, 1.0),
            (Kl, 1.0, 2.0),
            (Kl, 0.05, 0.1),
            (Chi2, 0.1, 0.2),
            (Chi2, 0.0, 0.0),
            (Chi2, 0.5, 1.0),
            (Chi2, 2.0, 4.0),
            (Chi2, 0.25, 0.5),
            (Tv, 0.0, 0.0),
            (Tv, 0.2, 0.2),
            (Tv, 0.5, 0.5),
            (Tv, 1.0, 1.0),
            (Tv, 1.5, 1.5),
        ];
        for (kind, radius, want) in cases {
            let got = rescale_radius(&AmbiguitySpec::new(kind, radius)).unwrap();
            assert!((got - want).abs() <= 1e-12, "{kind:?} {radius}: {got}");
        }
        for (alpha, want) in [
            (0.5, std::f64::consts::LN_2),
            (1.0, 0.0),
            (0.25, (4.0f64).ln()),
            (0.1, (10.0f64).ln()),
            (0.8, (1.25f64).ln()),
        ] {
            let got = rescale_radius(&AmbiguitySpec::new(Cvar, alpha)).unwrap();
            assert!((got - want).abs() <= 1e-12, "cvar {alpha}: {got}");
        }
        for kind in [SatisficingWasserstein, MarginalCvar, ConditionalGamma] {
            let spec = AmbiguitySpec::new(kind, 0.5);
            assert!(matches!(
                rescale_radius(&spec),
                Err(Error::UnsupportedKind { .. })
            ));
        }
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in AmbiguityKind::ALL {
            assert_eq!(AmbiguityKind::from_str(kind.as_str()).unwrap(), kind);
            let js = serde_json::to_string(&kind).unwrap();
            assert_eq!(js, format!("\"{}\"", kind.as_str()));
        }
        assert!(AmbiguityKind::from_str("mahalanobis").is_err());
    }

    #[test]
    fn spec_json_round_trips_with_infinite_scales() {
        let spec = AmbiguitySpec::new(AmbiguityKind::AugWasserstein, 0.3)
            .with_label_cost(0.5)
            .with_cost_scale(vec![1.0, f64::INFINITY, 2.5]);
        let js = serde_json::to_string(&spec).unwrap();
        assert!(js.contains("\"inf\""), "{js}");
        let back: AmbiguitySpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn validation_catches_bad_specs() {
        let d = 3;
        assert!(AmbiguitySpec::new(AmbiguityKind::Kl, -0.1).validate(d).is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::Cvar, 1.5).validate(d).is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::Cvar, 0.0).validate(d).is_ok());
        assert!(AmbiguitySpec::new(AmbiguityKind::MarginalCvar, 0.0)
            .with_z_features(vec![0])
            .validate(d)
            .is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::ConditionalGamma, 0.5)
            .with_z_features(vec![0])
            .validate(d)
            .is_err());
        // Missing κ / τ / z.
        assert!(AmbiguitySpec::new(AmbiguityKind::AugWasserstein, 0.1)
            .validate(d)
            .is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::SatisficingWasserstein, 0.0)
            .validate(d)
            .is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::MarginalCvar, 0.5)
            .validate(d)
            .is_err());
        // z index out of range.
        assert!(AmbiguitySpec::new(AmbiguityKind::MarginalCvar, 0.5)
            .with_z_features(vec![3])
            .validate(d)
            .is_err());
        // Scale length and sign.
        assert!(AmbiguitySpec::new(AmbiguityKind::Wasserstein, 0.1)
            .with_cost_scale(vec![1.0])
            .validate(d)
            .is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::Wasserstein, 0.1)
            .with_cost_scale(vec![1.0, -2.0, 1.0])
            .validate(d)
            .is_err());
        assert!(AmbiguitySpec::new(AmbiguityKind::Kl, 0.1)
            .with_cost_scale(vec![1.0, 1.0, 1.0])
            .validate(d)
            .is_err());
        // A correct spec of each flavour passes.
        assert!(AmbiguitySpec::new(AmbiguityKind::AugWasserstein, 0.1)
            .with_label_cost(0.2)
            .with_cost_scale(vec![1.0, f64::INFINITY, 2.0])
            .validate(d)
            .is_ok());
        assert!(AmbiguitySpec::new(AmbiguityKind::SatisficingWasserstein, 0.0)
            .with_target_ratio(1.3)
            .validate(d)
            .is_ok());
        assert!(AmbiguitySpec::new(AmbiguityKind::ConditionalGamma, f64::INFINITY)
            .with_z_features(vec![1])
            .validate(d)
            .is_ok());
    }

    #[test]
    fn zero_radius_training_is_bitwise_erm() {
        let data = synthetic(200, 5);
        let cfg = TrainConfig {
            steps: 400,
            ..TrainConfig::default()
        };
        for loss in [LossKind::Hinge, LossKind::Logistic] {
            let erm = fit_linear(&data, loss, &cfg).unwrap();
            for (kind, radius) in [
                (AmbiguityKind::Kl, 0.0),
                (AmbiguityKind::Chi2, 0.0),
                (AmbiguityKind::Tv, 0.0),
                (AmbiguityKind::Cvar, 1.0),
            ] {
                let spec = AmbiguitySpec::new(kind, radius);
                let model = train_f_dro(&data, &spec, &cfg, loss).unwrap();
                assert_eq!(model, erm, "{kind:?} at zero radius");
            }
        }
    }

    #[test]
    fn zero_radius_objective_matches_erm_within_tolerance() {
        let data = synthetic(200, 5);
        let cfg = TrainConfig {
            steps: 400,
            ..TrainConfig::default()
        };
        let (_, erm_obj) = fit_linear_with_objective(&data, LossKind::Hinge, &cfg).unwrap();
        let spec = AmbiguitySpec::new(AmbiguityKind::Kl, 0.0);
        let (_, robust_obj) =
            train_f_dro_with_objective(&data, &spec, &cfg, LossKind::Hinge).unwrap();
        assert!((robust_obj - erm_obj).abs() < 1e-3, "{robust_obj} vs {erm_obj}");
    }

    #[test]
    fn two_point_kl_matches_coefficient_grid_oracle() {
        // One feature, two points: x = −1 labelled 0, x = +1 labelled 1.
        let data = TabularDataset::with_unit_weights(
            vec![-1.0, 1.0],
            vec![0, 1],
            vec!["x1".into()],
        )
        .unwrap();
        let spec = AmbiguitySpec::new(AmbiguityKind::Kl, 0.1);
        let cfg = TrainConfig {
            steps: 4000,
            ..TrainConfig::default()
        };
        let (_, achieved) =
            train_f_dro_with_objective(&data, &spec, &cfg, LossKind::Hinge).unwrap();

        // Oracle: minimise over a (w, b) grid the exact inner value.
        let mut oracle = f64::INFINITY;
        for wi in 0..=300 {
            let w = -3.0 + wi as f64 * 0.02;
            for bi in 0..=300 {
                let b = -3.0 + bi as f64 * 0.02;
                let losses = [
                    (1.0 - (-(w * -1.0 + b))).max(0.0), // y = −1 at x = −1
                    (1.0 - (w * 1.0 + b)).max(0.0),     // y = +1 at x = +1
                ];
                let wc =
                    inner_worst_case(&losses, &[0.5, 0.5], &spec).unwrap();
                if wc.attained_value < oracle {
                    oracle = wc.attained_value;
                }
            }
        }
        assert!(
            (achieved - oracle).abs() <= 1e-2,
            "robust optimum {achieved} vs grid oracle {oracle}"
        );
    }

    #[test]
    fn dominance_over_erm_for_every_kind() {
        let data = synthetic(120, 11);
        let cfg = TrainConfig {
            steps: 600,
            ..TrainConfig::default()
        };
        let erm = fit_linear(&data, LossKind::Hinge, &cfg).unwrap();
        for (kind, radius) in [
            (AmbiguityKind::Kl, 0.3),
            (AmbiguityKind::Chi2, 0.5),
            (AmbiguityKind::Tv, 0.2),
            (AmbiguityKind::Cvar, 0.4),
        ] {
            let spec = AmbiguitySpec::new(kind, radius);
            let model = train_f_dro(&data, &spec, &cfg, LossKind::Hinge).unwrap();
            let robust_model = robust_linear_objective(&data, &model, &spec, cfg.l2).unwrap();
            let robust_erm = robust_linear_objective(&data, &erm, &spec, cfg.l2).unwrap();
            assert!(
                robust_model <= robust_erm + 1e-9,
                "{kind:?}: {robust_model} vs ERM {robust_erm}"
            );
        }
    }

    #[test]
    fn robust_optimum_is_monotone_in_radius() {
        let data = synthetic(80, 23);
        let cfg = TrainConfig {
            steps: 500,
            ..TrainConfig::default()
        };
        for kind in [AmbiguityKind::Kl, AmbiguityKind::Chi2, AmbiguityKind::Tv] {
            let mut last = f64::NEG_INFINITY;
            for radius in [0.0, 0.05, 0.1, 0.2, 0.4] {
                let spec = AmbiguitySpec::new(kind, radius);
                let (_, obj) =
                    train_f_dro_with_objective(&data, &spec, &cfg, LossKind::Hinge).unwrap();
                assert!(
                    obj >= last - 1e-6,
                    "{kind:?}: optimum fell from {last} to {obj} at ε={radius}"
                );
                last = obj;
            }
        }
        // CVaR tightens as α shrinks.
        let mut last = f64::NEG_INFINITY;
        for alpha in [1.0, 0.8, 0.6, 0.4, 0.2] {
            let spec = AmbiguitySpec::new(AmbiguityKind::Cvar, alpha);
            let (_, obj) =
                train_f_dro_with_objective(&data, &spec, &cfg, LossKind::Hinge).unwrap();
            assert!(
                obj >= last - 1e-6,
                "cvar: optimum fell from {last} to {obj} at α={alpha}"
            );
            last = obj;
        }
    }

    #[test]
    fn train_for_spec_dispatches_and_guards_losses() {
        let data = synthetic(60, 3);
        let cfg = TrainConfig {
            steps: 200,
            ..TrainConfig::default()
        };
        let w = AmbiguitySpec::new(AmbiguityKind::Wasserstein, 0.1);
        assert!(train_for_spec(&data, &w, &cfg, LossKind::Logistic).is_err());
        let fit = train_for_spec(&data, &w, &cfg, LossKind::Hinge).unwrap();
        assert!(!fit.degenerate);
        assert!(fit.achieved_radius.is_none());

        let sat = AmbiguitySpec::new(AmbiguityKind::SatisficingWasserstein, 0.0)
            .with_target_ratio(100.0);
        let fit = train_for_spec(&data, &sat, &cfg, LossKind::Hinge).unwrap();
        assert_eq!(fit.achieved_radius, Some(100.0));

        let kl = AmbiguitySpec::new(AmbiguityKind::Kl, 0.1);
        assert!(train_for_spec(&data, &kl, &cfg, LossKind::Logistic).is_ok());
    }
}
