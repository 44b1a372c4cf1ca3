//! Pointwise classification losses on raw scores.
//!
//! Labels live in `{0,1}` at the API surface and are mapped to `{-1,+1}`
//! internally; both losses are functions of the margin `m = y± · score`.

use serde::{Deserialize, Serialize};

/// Loss used by linear training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `max(0, 1 - m)`; at the kink `m = 1` the subgradient choice is 0.
    Hinge,
    /// `ln(1 + exp(-m))`, computed in a numerically stable form.
    Logistic,
}

impl LossKind {
    /// Loss value at margin `m = y± · score`.
    pub fn loss(self, m: f64) -> f64 {
        match self {
            LossKind::Hinge => (1.0 - m).max(0.0),
            LossKind::Logistic => softplus(-m),
        }
    }

    /// d(loss)/d(score) given `y±` and the score.
    pub fn dscore(self, y_pm: f64, score: f64) -> f64 {
        let m = y_pm * score;
        match self {
            LossKind::Hinge => {
                if m < 1.0 {
                    -y_pm
                } else {
                    0.0
                }
            }
            LossKind::Logistic => -y_pm * sigmoid(-m),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(format!("unknown loss {other:?} (expected hinge|logistic)")),
        }
    }
}

/// `{0,1}` label to `{-1,+1}`.
pub fn to_pm1(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_values_and_kink() {
        assert_eq!(LossKind::Hinge.loss(2.0), 0.0);
        assert_eq!(LossKind::Hinge.loss(1.0), 0.0);
        assert_eq!(LossKind::Hinge.loss(0.0), 1.0);
        assert_eq!(LossKind::Hinge.loss(-1.0), 2.0);
        // Active below the margin, zero at and above it.
        assert_eq!(LossKind::Hinge.dscore(1.0, 0.5), -1.0);
        assert_eq!(LossKind::Hinge.dscore(1.0, 1.0), 0.0);
        assert_eq!(LossKind::Hinge.dscore(-1.0, 0.5), 1.0);
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        assert!(LossKind::Logistic.loss(800.0) < 1e-300);
        let big = LossKind::Logistic.loss(-800.0);
        assert!((big - 800.0).abs() < 1e-9);
        assert!((LossKind::Logistic.loss(0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(sigmoid(-745.0) > 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_gradient_matches_finite_difference() {
        for &s in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            for &y in &[-1.0, 1.0] {
                let h = 1e-6;
                let num = (LossKind::Logistic.loss(y * (s + h)) - LossKind::Logistic.loss(y * (s - h))) / (2.0 * h);
                let ana = LossKind::Logistic.dscore(y, s);
                assert!((num - ana).abs() < 1e-6, "s={s} y={y}: {num} vs {ana}");
            }
        }
    }
}
