//! Bayes factors for equality- and order-constrained hypotheses.
//!
//! Hypotheses are linear constraint systems `RE θ = rE`, `RO θ > rO` over the
//! parameters of a statistical model. Each one is scored against the
//! unconstrained model through posterior and prior densities at the
//! equality point and posterior and prior probabilities of the order region,
//! using default priors built from a minimal fraction of the data.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapters;
pub mod constrained;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod hypothesis;
pub mod input;
pub mod linalg;
pub mod lp;
pub mod report;

pub use error::{Error, ParseError, ParseErrorKind, Result};
