//! Diagnose tabular distribution shifts and train robust linear classifiers.
//!
//! The crate is organised around a source→target pair of tabular datasets:
//!
//! - [`tabular`] — datasets, CSV loading, balancing, and synthetic shift generation;
//! - [`learners`] — weighted linear models, CART trees, gradient-boosted trees,
//!   evaluation metrics, and k-fold estimation;
//! - [`dro`] — ambiguity sets (KL, χ², TV, CVaR, Wasserstein variants, marginal and
//!   conditional sets) with exact inner worst-case solvers and robust training loops;
//! - [`diagnostics`] — decomposition of a performance drop into covariate-shift and
//!   conditional-shift terms, plus relative-regret estimation;
//! - [`worstcase`] — extract a worst-case reweighting and study what it would do to a
//!   freshly trained model, in-distribution and in transfer;
//! - [`regions`] — find interpretable covariate regions where the conditional
//!   relationship moved, score per-feature shifts, and simulate targeted collection;
//! - [`attribution`] — turn grids of runs into OLS regressions with significance
//!   tables;
//! - [`harness`] — run method × configuration grids over domain pairs with
//!   deterministic, reproducible outputs.
//!
//! Everything that consumes randomness takes an explicit `u64` seed and uses the
//! ChaCha8 generator, so outputs are bit-reproducible across platforms. All learners
//! and metrics consume per-row weights.

pub mod attribution;
pub mod diagnostics;
pub mod dro;
mod error;
pub mod exec;
pub mod harness;
pub mod learners;
pub mod region;
pub mod regions;
pub(crate) mod rng;
pub mod tabular;
pub mod worstcase;

pub use error::{Error, Result};
pub use region::Region;
pub use tabular::{DomainPair, SplitSpec, TabularDataset};
