//! Boosted linear/spline model-based trees for low-order functional ANOVA models.
//!
//! A fitted model has the form
//!
//! ```text
//! g(x) = g0 + Σ_j g_j(x_j) + Σ_{j<k} g_jk(x_j, x_k)
//! ```
//!
//! Main effects are grown from trees that split on and model a single feature
//! with a ridge-penalized line per leaf. Interactions are grown from trees that
//! split on one feature and fit a linear B-spline in the other. Fitting
//! alternates main-effect boosting, interaction screening and interaction
//! boosting for a few rounds; a final purification step makes the interaction
//! surfaces orthogonal to all functions of their individual features.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

// Negated float comparisons are used on purpose so that NaN fails checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binning;
pub mod boost;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod filter;
pub mod gami;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod modeltree;
pub mod purify;
pub mod scenario;
pub mod simgen;
pub mod spline;

pub use binning::BinMap;
pub use boost::{StageConfig, StageResult};
pub use dataset::{Dataset, SplitTag};
pub use error::{Error, Result};
pub use filter::{FilterResult, PairScore};
pub use gami::{GamiConfig, GamiModel, Term};
pub use loss::{LossKind, LossSpec};
pub use modeltree::{FitContext, FittedTree, TreeParams};
pub use purify::EffectStore;
pub use simgen::{ResponseKind, SimConfig, TruthOracle};
pub use spline::SplineBasis;
