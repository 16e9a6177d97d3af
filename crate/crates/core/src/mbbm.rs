//! Online boost-by-majority: every learner gets one unit vote, and its cost
//! matrix is the normalized change in the 0-1 potential that its vote would
//! cause.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{argmax_label, CostKind, CostMatrix, Label, LabelSpace};
use crate::error::{Error, Result};
use crate::potential::{
    weight_norm_bound, PotentialEngine, PotentialMode, PotentialTable, DEFAULT_WEIGHT_BOUND_CONSTANT,
};
use crate::weaklearn::WeakLearner;

/// How raw example weights `w^i[t] ∈ [0, k]` are brought into `[0, 1]`
/// before reaching the learners.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScaling {
    /// Divide by `k`.
    #[default]
    Trivial,
    /// Divide by `min(k, c·k^{5/2}/√(N−i))`, clipping at 1.
    NormBound { c: f64 },
    /// Divide by the largest raw weight learner `i` has seen so far.
    RunningMax,
}

impl WeightScaling {
    pub fn norm_bound_default() -> Self {
        WeightScaling::NormBound { c: DEFAULT_WEIGHT_BOUND_CONSTANT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbbmConfig {
    pub n: usize,
    pub gamma: f64,
    #[serde(default)]
    pub scaling: WeightScaling,
    /// Futures simulated per potential when the table would be too large.
    pub mc_samples: usize,
    pub seed: u64,
}

impl MbbmConfig {
    pub fn new(n: usize, gamma: f64) -> Self {
        MbbmConfig { n, gamma, scaling: WeightScaling::Trivial, mc_samples: 2000, seed: 0 }
    }
}

/// What happened in one round, for audit logs and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub y: Option<Label>,
    pub y_hat: Label,
    /// `l^1..l^N`.
    pub predictions: Vec<Label>,
    /// Raw `w^1[t]..w^N[t]`, filled in once the label is known.
    pub weights: Vec<f64>,
    /// Final vote counts `s^N`.
    pub votes: Vec<i64>,
    pub mode: PotentialMode,
}

struct OpenRound {
    x: Vec<f64>,
    /// `raw_sums[i][r]`: unnormalized L1 norm of row `r` of learner `i`'s matrix.
    raw_sums: Vec<Vec<f64>>,
    record: RoundRecord,
}

pub struct MbbmBooster<L> {
    space: LabelSpace,
    gamma: f64,
    scaling: WeightScaling,
    engine: PotentialEngine,
    learners: Vec<L>,
    running_max: Vec<f64>,
    t: u64,
    open: Option<OpenRound>,
}

impl<L: WeakLearner> MbbmBooster<L> {
    /// Builds a booster with its own potential table.
    pub fn new(space: LabelSpace, config: &MbbmConfig, learners: Vec<L>) -> Result<Self> {
        let table = Arc::new(PotentialTable::new(space.k(), config.gamma)?);
        Self::with_table(space, config, learners, table)
    }

    /// Builds a booster that shares `table` with others using the same
    /// `(k, γ)`.
    pub fn with_table(
        space: LabelSpace,
        config: &MbbmConfig,
        learners: Vec<L>,
        table: Arc<PotentialTable>,
    ) -> Result<Self> {
        if config.gamma <= 0.0 || config.gamma >= 0.5 {
            return Err(Error::InvalidParameter(format!("edge {} must lie in (0, 0.5)", config.gamma)));
        }
        if learners.is_empty() || learners.len() != config.n {
            return Err(Error::InvalidParameter(format!(
                "expected {} weak learners, got {}",
                config.n,
                learners.len()
            )));
        }
        if table.k() != space.k() || table.gamma() != config.gamma {
            return Err(Error::InvalidParameter("potential table built for a different (k, γ)".into()));
        }
        if let WeightScaling::NormBound { c } = config.scaling {
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("weight bound constant {c} must be positive")));
            }
        }
        let engine = PotentialEngine::for_run(table, config.n, config.mc_samples, config.seed);
        Ok(MbbmBooster {
            space,
            gamma: config.gamma,
            scaling: config.scaling,
            engine,
            running_max: vec![0.0; learners.len()],
            learners,
            t: 0,
            open: None,
        })
    }

    /// Forces exact or Monte Carlo potentials regardless of the size estimate.
    pub fn with_mode(mut self, mode: PotentialMode) -> Self {
        self.engine = self.engine.with_mode(mode);
        self
    }

    pub fn n(&self) -> usize {
        self.learners.len()
    }

    pub fn space(&self) -> LabelSpace {
        self.space
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mode(&self) -> PotentialMode {
        self.engine.mode()
    }

    pub fn learners(&self) -> &[L] {
        &self.learners
    }

    /// Normalized cost matrix for learner `i` (1-based) given the votes
    /// `s` of the learners before it, plus each row's raw L1 norm.
    pub fn cost_matrix(&self, i: usize, s: &[i64]) -> Result<(CostMatrix, Vec<f64>)> {
        self.cost_matrix_at(i, s, self.t)
    }

    fn cost_matrix_at(&self, i: usize, s: &[i64], t: u64) -> Result<(CostMatrix, Vec<f64>)> {
        let k = self.space.k();
        let n = self.n();
        if i == 0 || i > n {
            return Err(Error::InvalidParameter(format!("learner index {i} outside [1..{n}]")));
        }
        if s.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: s.len() });
        }
        let mut c = CostMatrix::zeros(k, CostKind::EorNormalized);
        let mut sums = Vec::with_capacity(k);
        for r in 0..k {
            let phi = self.engine.row(Label::from_index(r), n - i, s, (t, i as u64, r as u64))?;
            let row = c.row_mut(r);
            let mut sum = 0.0;
            for l in 0..k {
                if l != r {
                    // exact potentials are proper, so this only trims rounding
                    let d = (phi[l] - phi[r]).max(0.0);
                    row[l] = d;
                    sum += d;
                }
            }
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
            sums.push(sum);
        }
        Ok((c, sums))
    }

    /// Runs every learner on `x` in order and returns the majority vote.
    pub fn predict(&mut self, x: &[f64]) -> Result<(Label, RoundRecord)> {
        if self.open.is_some() {
            return Err(Error::Protocol("predict called twice without learn"));
        }
        let k = self.space.k();
        let t = self.t + 1;
        let mut s = vec![0i64; k];
        let mut predictions = Vec::with_capacity(self.n());
        let mut raw_sums = Vec::with_capacity(self.n());
        for i in 1..=self.n() {
            let (cost, sums) = self.cost_matrix_at(i, &s, t)?;
            let learner = &mut self.learners[i - 1];
            learner.receive_cost_matrix(&cost);
            let l = learner.predict(x).map_err(|e| learner_error(i, e))?;
            self.space.check(l).map_err(|e| learner_error(i, e))?;
            s[l.index()] += 1;
            predictions.push(l);
            raw_sums.push(sums);
        }
        let y_hat = argmax_label(&s);
        let record =
            RoundRecord { t, y: None, y_hat, predictions, weights: Vec::new(), votes: s, mode: self.engine.mode() };
        self.open = Some(OpenRound { x: x.to_vec(), raw_sums, record: record.clone() });
        Ok((y_hat, record))
    }

    /// Reveals `y`, trains every learner with its scaled weight and closes
    /// the round.
    pub fn learn(&mut self, y: Label) -> Result<RoundRecord> {
        self.space.check(y)?;
        let open = self.open.take().ok_or(Error::Protocol("learn called before predict"))?;
        let OpenRound { x, raw_sums, mut record } = open;
        let k = self.space.k();
        let n = self.n();
        let mut weights = Vec::with_capacity(n);
        for i in 1..=n {
            let w = raw_sums[i - 1][y.index()];
            weights.push(w);
            let scale = match self.scaling {
                WeightScaling::Trivial => k as f64,
                WeightScaling::NormBound { c } => weight_norm_bound(k, self.gamma, n, i, c),
                WeightScaling::RunningMax => {
                    self.running_max[i - 1] = self.running_max[i - 1].max(w);
                    self.running_max[i - 1]
                }
            };
            let delivered = if scale > 0.0 { (w / scale).clamp(0.0, 1.0) } else { 0.0 };
            self.learners[i - 1].learn(&x, y, delivered).map_err(|e| learner_error(i, e))?;
        }
        record.y = Some(y);
        record.weights = weights;
        self.t += 1;
        Ok(record)
    }

    /// Predict-then-learn on one labelled example.
    pub fn step(&mut self, x: &[f64], y: Label) -> Result<RoundRecord> {
        self.predict(x)?;
        self.learn(y)
    }
}

fn learner_error(index: usize, e: Error) -> Error {
    Error::Learner { index, reason: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_cost_matrix, EdgeDistribution};
    use crate::potential::zero_one_loss;
    use crate::weaklearn::{AdversaryMode, AdversaryStream, EdgeOracleLearner, OnlineStump};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l(one_based: usize) -> Label {
        Label::from_index(one_based - 1)
    }

    /// Always predicts one fixed label and records the weights it is given.
    struct Fixed {
        label: Label,
        seen: Vec<f64>,
    }

    impl WeakLearner for Fixed {
        fn predict(&self, _x: &[f64]) -> Result<Label> {
            Ok(self.label)
        }

        fn learn(&mut self, _x: &[f64], _y: Label, w: f64) -> Result<()> {
            self.seen.push(w);
            Ok(())
        }
    }

    fn fixed(labels: &[usize]) -> Vec<Fixed> {
        labels.iter().map(|&v| Fixed { label: l(v), seen: vec![] }).collect()
    }

    fn oracles(space: LabelSpace, n: usize) -> Vec<EdgeOracleLearner> {
        (1..=n).map(|i| EdgeOracleLearner::new(i, space).unwrap()).collect()
    }

    #[test]
    fn rejects_missing_or_zero_edge() {
        let space = LabelSpace::new(3).unwrap();
        assert!(MbbmBooster::new(space, &MbbmConfig::new(2, 0.0), fixed(&[1, 2])).is_err());
        assert!(MbbmBooster::new(space, &MbbmConfig::new(3, 0.1), fixed(&[1, 2])).is_err());
        assert!(MbbmBooster::new(space, &MbbmConfig::new(2, 0.1), fixed(&[1, 2])).is_ok());
    }

    #[test]
    fn binary_single_learner_matrix_and_weight() {
        let space = LabelSpace::new(2).unwrap();
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(1, 0.2), fixed(&[2])).unwrap();
        let (c, sums) = b.cost_matrix(1, &[0, 0]).unwrap();
        assert_eq!(c.row(0), &[0.0, 1.0]);
        assert_eq!(c.row(1), &[1.0, 0.0]);
        assert_eq!(sums, vec![1.0, 1.0]);
        let (y_hat, _) = b.predict(&[0.0]).unwrap();
        assert_eq!(y_hat, l(2));
        let rec = b.learn(l(1)).unwrap();
        assert_eq!(rec.weights, vec![1.0]);
        assert_eq!(b.learners()[0].seen, vec![0.5]);
    }

    #[test]
    fn last_learner_sees_uniform_rows_when_one_vote_decides() {
        let space = LabelSpace::new(3).unwrap();
        let b = MbbmBooster::new(space, &MbbmConfig::new(3, 0.2), fixed(&[1, 1, 1])).unwrap();
        // r = 1 leads by one: a vote for r keeps the win, any other vote ties
        let (c, _) = b.cost_matrix(3, &[1, 0, 0]).unwrap();
        assert_eq!(c.row(0), &[0.0, 0.5, 0.5]);
        // r = 2 is behind by one whatever happens: the row is all zero
        assert_eq!(c.row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn decided_rows_give_zero_weight() {
        let space = LabelSpace::new(3).unwrap();
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(3, 0.2), fixed(&[1, 1, 1])).unwrap();
        b.predict(&[0.0]).unwrap();
        let rec = b.learn(l(1)).unwrap();
        // before learner 3, label 1 leads 2-0, so its vote cannot matter
        assert_eq!(rec.weights[2], 0.0);
        assert!(rec.weights.iter().all(|&w| (0.0..=3.0).contains(&w)));
    }

    #[test]
    fn unanimous_vote_wins_and_single_voter_is_followed() {
        let space = LabelSpace::new(4).unwrap();
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(3, 0.1), fixed(&[3, 3, 3])).unwrap();
        assert_eq!(b.predict(&[0.0]).unwrap().0, l(3));
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(1, 0.1), fixed(&[4])).unwrap();
        assert_eq!(b.predict(&[0.0]).unwrap().0, l(4));
    }

    #[test]
    fn protocol_is_enforced() {
        let space = LabelSpace::new(2).unwrap();
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(1, 0.1), fixed(&[1])).unwrap();
        assert!(matches!(b.learn(l(1)), Err(Error::Protocol(_))));
        b.predict(&[0.0]).unwrap();
        assert!(matches!(b.predict(&[0.0]), Err(Error::Protocol(_))));
    }

    #[test]
    fn learner_failures_carry_their_index() {
        let space = LabelSpace::new(3).unwrap();
        let learners: Vec<Box<dyn WeakLearner>> = vec![
            Box::new(EdgeOracleLearner::new(1, space).unwrap()),
            Box::new(EdgeOracleLearner::new(5, space).unwrap()),
        ];
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(2, 0.1), learners).unwrap();
        assert!(matches!(b.predict(&[1.0, 2.0]), Err(Error::Learner { index: 2, .. })));
    }

    #[test]
    fn oracle_error_rate_matches_potential() {
        let space = LabelSpace::new(2).unwrap();
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(3, 0.2), oracles(space, 3)).unwrap();
        let mode = AdversaryMode::ConstantEdge { edge: 0.2 };
        let t = 100_000;
        let mut losses = 0usize;
        for ex in AdversaryStream::new(space, 3, mode, 21).unwrap().take(t) {
            let rec = b.step(&ex.features, ex.label).unwrap();
            losses += usize::from(zero_one_loss(ex.label, &rec.votes));
        }
        let p = losses as f64 / t as f64;
        let se = (0.352f64 * 0.648 / t as f64).sqrt();
        assert!((p - 0.352).abs() < 3.0 * se, "{p}");
    }

    #[test]
    fn matrices_are_valid_and_weights_scaled() {
        let space = LabelSpace::new(4).unwrap();
        for scaling in [WeightScaling::Trivial, WeightScaling::norm_bound_default(), WeightScaling::RunningMax] {
            let cfg = MbbmConfig { scaling, ..MbbmConfig::new(6, 0.1) };
            let mut b = MbbmBooster::new(space, &cfg, fixed(&[1, 2, 3, 4, 1, 2])).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..50 {
                let s: Vec<i64> = (0..4).map(|_| rng.gen_range(0..3)).collect();
                let used: i64 = s.iter().sum();
                if used as usize >= 6 {
                    continue;
                }
                let (c, _) = b.cost_matrix(used as usize + 1, &s).unwrap();
                assert!(validate_cost_matrix(&c, space).unwrap().is_valid());
                b.step(&[0.0], l(rng.gen_range(1..=4))).unwrap();
            }
            for f in b.learners() {
                assert!(f.seen.iter().all(|w| (0.0..=1.0).contains(w)));
            }
        }
    }

    #[test]
    fn monte_carlo_mode_is_reproducible_and_valid() {
        let space = LabelSpace::new(3).unwrap();
        let run = || {
            let cfg = MbbmConfig { mc_samples: 200, seed: 9, ..MbbmConfig::new(5, 0.2) };
            let mut b = MbbmBooster::new(space, &cfg, oracles(space, 5)).unwrap().with_mode(PotentialMode::MonteCarlo);
            let mode = AdversaryMode::ConstantEdge { edge: 0.2 };
            AdversaryStream::new(space, 5, mode, 4)
                .unwrap()
                .take(30)
                .map(|ex| b.step(&ex.features, ex.label).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|r| r.mode == PotentialMode::MonteCarlo));
        let cfg = MbbmConfig { mc_samples: 200, seed: 9, ..MbbmConfig::new(5, 0.2) };
        let b = MbbmBooster::new(space, &cfg, oracles(space, 5)).unwrap().with_mode(PotentialMode::MonteCarlo);
        let (c, _) = b.cost_matrix(2, &[1, 0, 0]).unwrap();
        assert!(validate_cost_matrix(&c, space).unwrap().is_valid());
    }

    #[test]
    fn stumps_run_end_to_end() {
        let space = LabelSpace::new(3).unwrap();
        let learners: Vec<OnlineStump> = (0..5).map(|_| OnlineStump::new(space, 2)).collect();
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(5, 0.1), learners).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut correct = 0;
        for t in 0..2000 {
            let y = rng.gen_range(0..3);
            let x = [y as f64 + rng.gen_range(-0.3..0.3), rng.gen::<f64>()];
            let (p, _) = b.predict(&x).unwrap();
            if t >= 1000 && p.index() == y {
                correct += 1;
            }
            b.learn(l(y + 1)).unwrap();
        }
        // one stump can separate at most two of the three classes
        assert!(correct > 750, "{correct}");
    }

    #[test]
    fn error_rate_respects_asymptotic_bound_on_uniform_draws() {
        // votes drawn directly from the edge distribution, no booster state
        let (k, gamma, n) = (3, 0.3, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = EdgeDistribution::new(k, gamma, l(1)).unwrap();
        let trials = 20_000;
        let mut losses = 0;
        for _ in 0..trials {
            let mut s = vec![0i64; k];
            for _ in 0..n {
                s[d.sample(&mut rng).index()] += 1;
            }
            losses += usize::from(zero_one_loss(l(1), &s));
        }
        assert!((losses as f64 / trials as f64) < crate::potential::asymptotic_error_bound(k, gamma, n));
    }
}
