//! Adaptive online boosting with a surrogate loss. Each learner's vote
//! weight is tuned by projected OGD, cost matrices are loss gradients at the
//! current partial vote, and the final prediction comes from one of the N
//! partial-vote experts picked by Hedge.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{argmax_label, CostKind, CostMatrix, Label, LabelSpace};
use crate::error::{Error, Result};
use crate::online_opt::{HedgeState, OgdState, RateSchedule};
use crate::weaklearn::WeakLearner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    Logistic,
    Exponential,
    SquareHinge,
}

impl std::str::FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LossVariant::Logistic),
            "exponential" => Ok(LossVariant::Exponential),
            "square_hinge" => Ok(LossVariant::SquareHinge),
            other => Err(Error::InvalidParameter(format!("unknown loss variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for LossVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossVariant::Logistic => "logistic",
            LossVariant::Exponential => "exponential",
            LossVariant::SquareHinge => "square_hinge",
        })
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + e^z)`.
fn inv_one_plus_exp(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn hinge(z: f64) -> f64 {
    z.max(0.0)
}

impl LossVariant {
    /// `L^r(s)`.
    pub fn loss(self, r: Label, s: &[f64]) -> f64 {
        let sr = s[r.index()];
        let others = s.iter().enumerate().filter(|&(l, _)| l != r.index()).map(|(_, &v)| v - sr);
        match self {
            LossVariant::Logistic => others.map(softplus).sum(),
            LossVariant::Exponential => others.map(f64::exp).sum(),
            LossVariant::SquareHinge => others.map(|d| 0.5 * hinge(d + 1.0).powi(2)).sum(),
        }
    }

    /// `∂L^r/∂s[l]` for `l != r`.
    fn off_diagonal(self, sr: f64, sl: f64) -> f64 {
        match self {
            LossVariant::Logistic => inv_one_plus_exp(sr - sl),
            LossVariant::Exponential => (sl - sr).exp(),
            LossVariant::SquareHinge => hinge(sl - sr + 1.0),
        }
    }

    /// Row `r` is `∇L^r(s)`: off-diagonal partials, diagonal their negated sum.
    pub fn cost_matrix(self, s: &[f64]) -> CostMatrix {
        let k = s.len();
        let mut c = CostMatrix::zeros(k, CostKind::Gradient);
        for r in 0..k {
            let row = c.row_mut(r);
            let mut sum = 0.0;
            for l in 0..k {
                if l != r {
                    row[l] = self.off_diagonal(s[r], s[l]);
                    sum += row[l];
                }
            }
            row[r] = -sum;
        }
        c
    }

    /// Derivative of `α ↦ L^y(s + α·e_l)` at `alpha`.
    pub fn gradient(self, alpha: f64, s: &[f64], l: Label, y: Label) -> f64 {
        let sy = s[y.index()];
        if l != y {
            return self.off_diagonal(sy, s[l.index()] + alpha);
        }
        -s.iter()
            .enumerate()
            .filter(|&(j, _)| j != y.index())
            .map(|(_, &sj)| self.off_diagonal(sy + alpha, sj))
            .sum::<f64>()
    }

    /// Half-width `c` of the feasible interval `[-c, c]` for vote weights.
    pub fn half_width(self, n: usize) -> f64 {
        match self {
            LossVariant::Logistic | LossVariant::Exponential => 2.0,
            LossVariant::SquareHinge => 1.0 / (n as f64).sqrt(),
        }
    }

    /// OGD schedule for learner `i` (1-based) of `n`.
    pub fn schedule(self, k: usize, n: usize, i: usize) -> RateSchedule {
        let km1 = k as f64 - 1.0;
        let base = 2.0 * 2f64.sqrt() / km1;
        match self {
            LossVariant::Logistic => RateSchedule::inv_sqrt(base),
            LossVariant::Exponential => RateSchedule::inv_sqrt(base * (-(i as f64)).exp()),
            LossVariant::SquareHinge => {
                let c = self.half_width(n);
                RateSchedule::inv_sqrt(2f64.sqrt() * c / (km1 + c * n as f64))
            }
        }
    }

    /// Largest possible `−C[y, y]` seen by learner `i` (1-based), used to
    /// map example weights into `[0, 1]`.
    pub fn weight_normalizer(self, k: usize, n: usize, i: usize) -> f64 {
        let km1 = k as f64 - 1.0;
        match self {
            LossVariant::Logistic => km1,
            LossVariant::Exponential => km1 * (2.0 * i as f64).exp(),
            LossVariant::SquareHinge => km1 * (1.0 + 2.0 * self.half_width(n) * i as f64),
        }
    }
}

/// Per-learner state: OGD on its vote weight and running sums for its
/// empirical edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertState {
    pub ogd: OgdState,
    /// `Σ_t C_t[y_t, l_t]`.
    pub edge_num: f64,
    /// `Σ_t C_t[y_t, y_t]`.
    pub edge_den: f64,
}

impl ExpertState {
    /// `None` while the denominator is zero.
    pub fn empirical_edge(&self) -> Option<f64> {
        if self.edge_den == 0.0 {
            None
        } else {
            Some(self.edge_num / self.edge_den)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlmConfig {
    pub n: usize,
    pub loss: LossVariant,
    pub seed: u64,
}

impl OlmConfig {
    pub fn new(n: usize, loss: LossVariant) -> Self {
        OlmConfig { n, loss, seed: 0 }
    }
}

/// One round as seen by the booster, for audit logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlmRecord {
    pub t: u64,
    pub y: Option<Label>,
    pub y_hat: Label,
    /// 1-based index of the expert that made the prediction.
    pub i_t: usize,
    /// Weak learner outputs `l^1..l^N`.
    pub predictions: Vec<Label>,
    /// Expert outputs `ŷ^1..ŷ^N`.
    pub experts: Vec<Label>,
    /// Vote weights used this round.
    pub alphas: Vec<f64>,
    /// Running empirical edges after the update.
    pub edges: Vec<Option<f64>>,
    /// Weights passed to the learners.
    pub weights: Vec<f64>,
}

struct OpenRound {
    x: Vec<f64>,
    /// `s^{i-1}` for each learner.
    prefixes: Vec<Vec<f64>>,
    costs: Vec<CostMatrix>,
    record: OlmRecord,
}

pub struct OlmBooster<L> {
    space: LabelSpace,
    loss: LossVariant,
    learners: Vec<L>,
    experts: Vec<ExpertState>,
    hedge: HedgeState,
    rng: ChaCha8Rng,
    t: u64,
    open: Option<OpenRound>,
}

impl<L: WeakLearner> OlmBooster<L> {
    pub fn new(space: LabelSpace, config: &OlmConfig, learners: Vec<L>) -> Result<Self> {
        if learners.is_empty() || learners.len() != config.n {
            return Err(Error::InvalidParameter(format!(
                "expected {} weak learners, got {}",
                config.n,
                learners.len()
            )));
        }
        let n = learners.len();
        let c = config.loss.half_width(n);
        let experts = (1..=n)
            .map(|i| ExpertState {
                ogd: OgdState::new(c, config.loss.schedule(space.k(), n, i)),
                edge_num: 0.0,
                edge_den: 0.0,
            })
            .collect();
        Ok(OlmBooster {
            space,
            loss: config.loss,
            learners,
            experts,
            hedge: HedgeState::new(n)?,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            t: 0,
            open: None,
        })
    }

    pub fn n(&self) -> usize {
        self.learners.len()
    }

    pub fn loss(&self) -> LossVariant {
        self.loss
    }

    pub fn learners(&self) -> &[L] {
        &self.learners
    }

    pub fn experts(&self) -> &[ExpertState] {
        &self.experts
    }

    pub fn hedge(&self) -> &HedgeState {
        &self.hedge
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.experts.iter().map(|e| e.ogd.alpha).collect()
    }

    pub fn empirical_edges(&self) -> Vec<Option<f64>> {
        self.experts.iter().map(ExpertState::empirical_edge).collect()
    }

    pub fn predict(&mut self, x: &[f64]) -> Result<(Label, OlmRecord)> {
        if self.open.is_some() {
            return Err(Error::Protocol("predict called twice without learn"));
        }
        let k = self.space.k();
        let n = self.n();
        let mut s = vec![0.0; k];
        let mut prefixes = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);
        let mut predictions = Vec::with_capacity(n);
        let mut experts = Vec::with_capacity(n);
        let alphas = self.alphas();
        for i in 0..n {
            let cost = self.loss.cost_matrix(&s);
            let learner = &mut self.learners[i];
            learner.receive_cost_matrix(&cost);
            let l = learner.predict(x).map_err(|e| learner_error(i + 1, e))?;
            self.space.check(l).map_err(|e| learner_error(i + 1, e))?;
            prefixes.push(s.clone());
            costs.push(cost);
            s[l.index()] += alphas[i];
            predictions.push(l);
            experts.push(argmax_label(&s));
        }
        let chosen = self.hedge.sample(&mut self.rng);
        let y_hat = experts[chosen];
        self.t += 1;
        let record = OlmRecord {
            t: self.t,
            y: None,
            y_hat,
            i_t: chosen + 1,
            predictions,
            experts,
            alphas,
            edges: Vec::new(),
            weights: Vec::new(),
        };
        self.open = Some(OpenRound { x: x.to_vec(), prefixes, costs, record: record.clone() });
        Ok((y_hat, record))
    }

    pub fn learn(&mut self, y: Label) -> Result<OlmRecord> {
        self.space.check(y)?;
        let open = self.open.take().ok_or(Error::Protocol("learn called before predict"))?;
        let OpenRound { x, prefixes, costs, mut record } = open;
        let k = self.space.k();
        let n = self.n();
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let l = record.predictions[i];
            let e = &mut self.experts[i];
            let g = self.loss.gradient(e.ogd.alpha, &prefixes[i], l, y);
            e.ogd.step(g)?;
            let c_yy = costs[i].cost(y, y);
            let w = (-c_yy / self.loss.weight_normalizer(k, n, i + 1)).clamp(0.0, 1.0);
            self.learners[i].learn(&x, y, w).map_err(|err| learner_error(i + 1, err))?;
            e.edge_num += costs[i].cost(y, l);
            e.edge_den += c_yy;
            weights.push(w);
        }
        let erred: Vec<bool> = record.experts.iter().map(|&p| p != y).collect();
        self.hedge.update(&erred)?;
        record.y = Some(y);
        record.edges = self.empirical_edges();
        record.weights = weights;
        Ok(record)
    }

    pub fn step(&mut self, x: &[f64], y: Label) -> Result<OlmRecord> {
        self.predict(x)?;
        self.learn(y)
    }
}

fn learner_error(index: usize, e: Error) -> Error {
    Error::Learner { index, reason: e.to_string() }
}
