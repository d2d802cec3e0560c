//! Meta-universal normalized-maximum-likelihood (NML) classification.
//!
//! The crate builds data-dependent parameter regions around an estimate,
//! evaluates the NML distribution restricted to those regions, computes the
//! maximal leakage of the region (its stochastic complexity) and checks the
//! misclassification bounds that tie leakage and approximation error to the
//! excess risk over the MAP classifier.
//!
//! Modules, bottom-up:
//! - [`numerics`]: χ² quantiles, Jacobi eigensolver, divergences, finite differences.
//! - [`models`]: the [`ConditionalModel`] trait and three softmax-type families.
//! - [`decision`]: ground truth, MAP rule, hypotheses and exact misclassification rates.
//! - [`region`], [`optim`], [`nml`]: parameter regions, constrained suprema, NML distributions.
//! - [`estimators`]: maximum likelihood and the noisy-ball radius schedules.
//! - [`bounds`]: Δ, redundancy, maximal regret and every bound's right-hand side.
//! - [`oracle`]: brute-force grid searches used to cross-check the solvers.
//! - [`harness`]: experiment configuration, runner, tables and property suites.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod decision;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod models;
pub mod nml;
pub mod numerics;
pub mod optim;
pub mod oracle;
pub mod region;
pub mod rng;

pub use error::{Error, Result};
pub use models::ConditionalModel;
