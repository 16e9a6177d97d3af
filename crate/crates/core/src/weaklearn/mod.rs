//! Online weak learners and the adversarial streams used to probe boosters.

mod adversary;
mod naive_bayes;
mod oracle;
mod stump;
mod wlc;

pub use adversary::{two_phase_boundary, AdversaryMode, AdversaryStream};
pub use naive_bayes::{OnlineNaiveBayes, DEFAULT_VARIANCE_FLOOR};
pub use oracle::EdgeOracleLearner;
pub use stump::{OnlineStump, StumpRule, DEFAULT_MAX_BINS, DEFAULT_REFRESH_PERIOD};
pub use wlc::{empirical_wlc_check, WlcEntry, WlcReport};

use crate::domain::{CostMatrix, Label};
use crate::error::Result;

/// What a booster sees of a weak learner.
///
/// Per round the booster calls `receive_cost_matrix`, then `predict` at most
/// once, then `learn` after the true label is revealed. Only `learn` may
/// change what later predictions return.
pub trait WeakLearner: Send {
    /// Cost matrix for the current round. The built-in learners only use
    /// the per-example weight passed to `learn`, so the default ignores it.
    fn receive_cost_matrix(&mut self, _cost: &CostMatrix) {}

    fn predict(&self, x: &[f64]) -> Result<Label>;

    /// `w` is an importance weight in `[0, 1]`.
    fn learn(&mut self, x: &[f64], y: Label, w: f64) -> Result<()>;
}

impl<T: WeakLearner + ?Sized> WeakLearner for Box<T> {
    fn receive_cost_matrix(&mut self, cost: &CostMatrix) {
        (**self).receive_cost_matrix(cost)
    }

    fn predict(&self, x: &[f64]) -> Result<Label> {
        (**self).predict(x)
    }

    fn learn(&mut self, x: &[f64], y: Label, w: f64) -> Result<()> {
        (**self).learn(x, y, w)
    }
}
