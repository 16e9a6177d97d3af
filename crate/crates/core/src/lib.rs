//! Online multiclass boosting.
//!
//! Two boosters share one weak-learner interface: [`mbbm::MbbmBooster`]
//! builds cost matrices from boost-by-majority potentials and needs a known
//! edge, while [`olm::OlmBooster`] adapts vote weights by online gradient
//! descent on a surrogate loss and picks among its partial-vote experts by
//! Hedge.

// Index loops read closer to the math in the numeric kernels.
#![allow(clippy::needless_range_loop)]

pub mod domain;
pub mod error;
pub mod mbbm;
pub mod olm;
pub mod online_opt;
pub mod potential;
pub mod weaklearn;

pub use domain::{
    argmax_label, validate_cost_matrix, CostKind, CostMatrix, EdgeDistribution, Example, Label, LabelSpace,
    ValidityReport, Violation, VoteVector,
};
pub use error::{Error, Result};
