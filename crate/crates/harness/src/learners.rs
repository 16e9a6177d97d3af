//! Builds weak-learner pools with per-instance randomized hyperparameters.

use mcboost::weaklearn::{EdgeOracleLearner, OnlineNaiveBayes, OnlineStump, WeakLearner};
use mcboost::LabelSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{LearnerKind, LearnerParams};
use crate::error::Result;

pub type BoxedLearner = Box<dyn WeakLearner>;

/// Hyperparameters actually drawn for one learner, for the audit trail.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LearnerInstance {
    pub index: usize,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refresh_period: Option<usize>,
}

/// `n` learners; stump refresh periods are drawn uniformly from the
/// configured range using `seed`.
pub fn build_pool(
    params: &LearnerParams,
    space: LabelSpace,
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<(Vec<BoxedLearner>, Vec<LearnerInstance>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learners: Vec<BoxedLearner> = Vec::with_capacity(n);
    let mut instances = Vec::with_capacity(n);
    for index in 1..=n {
        let (learner, refresh_period): (BoxedLearner, _) = match params.kind {
            LearnerKind::Stump => {
                let period = rng.gen_range(params.refresh_period.lo..=params.refresh_period.hi);
                (Box::new(OnlineStump::with_params(space, dim, period, params.max_bins)), Some(period))
            }
            LearnerKind::NaiveBayes => {
                (Box::new(OnlineNaiveBayes::with_variance_floor(space, dim, params.variance_floor)), None)
            }
            LearnerKind::Oracle => (Box::new(EdgeOracleLearner::new(index, space)?), None),
        };
        learners.push(learner);
        instances.push(LearnerInstance { index, kind: params.kind.name(), refresh_period });
    }
    Ok((learners, instances))
}
