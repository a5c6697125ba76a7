//! Continuized Nesterov acceleration for quasar-convex minimization.
//!
//! The crate bundles the optimizers (continuized acceleration with Poisson
//! jump times, plain gradient descent, the line-search AGD baselines and the
//! stochastic GLMtron family), sampling-based certification of quasar
//! convexity and related growth conditions, and a benchmark harness that runs
//! grid searches over step-size constants and writes CSV traces.

// NaN must fail parameter checks, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bench;
pub mod continuized;
pub mod error;
pub mod event_clock;
pub mod glmtron;
pub mod hss;
pub mod linalg;
pub mod objectives;
pub mod quasar_analysis;
pub mod trace;

pub use error::{Error, Result};
