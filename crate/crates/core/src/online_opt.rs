//! Online optimization pieces: projected gradient descent on an interval,
//! Hedge over a fixed set of experts, and exponential weights with
//! weighted cost feedback (LEA).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{check_weight, CostMatrix, Label};
use crate::error::{Error, Result};

/// `η_t = scale / √t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub scale: f64,
}

impl RateSchedule {
    pub fn inv_sqrt(scale: f64) -> Self {
        RateSchedule { scale }
    }

    pub fn rate(&self, t: u64) -> f64 {
        self.scale / (t as f64).sqrt()
    }
}

/// Projected OGD on `[-c, c]`. `t` is the index of the next step, from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgdState {
    pub alpha: f64,
    pub t: u64,
    pub half_width: f64,
    pub schedule: RateSchedule,
}

impl OgdState {
    pub fn new(half_width: f64, schedule: RateSchedule) -> Self {
        OgdState { alpha: 0.0, t: 1, half_width, schedule }
    }

    /// `α ← clip(α − η_t·g, −c, c)`, then advances `t`.
    pub fn step(&mut self, gradient: f64) -> Result<f64> {
        if !gradient.is_finite() {
            return Err(Error::NonFiniteGradient(gradient));
        }
        let eta = self.schedule.rate(self.t);
        self.alpha = (self.alpha - eta * gradient).clamp(-self.half_width, self.half_width);
        self.t += 1;
        Ok(self.alpha)
    }
}

/// Exponential weights with unit rate: expert `i` has weight `exp(−m_i)`
/// where `m_i` counts its mistakes. Counts are kept instead of products so
/// long runs never underflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    mistakes: Vec<u64>,
}

impl HedgeState {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("hedge needs at least one expert".into()));
        }
        Ok(HedgeState { mistakes: vec![0; n] })
    }

    pub fn len(&self) -> usize {
        self.mistakes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mistakes.is_empty()
    }

    pub fn mistakes(&self) -> &[u64] {
        &self.mistakes
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        -(self.mistakes[i] as f64)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_weight(i).exp()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        normalized_exp(&self.mistakes.iter().map(|&m| -(m as f64)).collect::<Vec<_>>())
    }

    /// Draws an expert index. Consumes exactly one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let logw: Vec<f64> = self.mistakes.iter().map(|&m| -(m as f64)).collect();
        sample_log_weights(&logw, rng)
    }

    pub fn update(&mut self, erred: &[bool]) -> Result<()> {
        if erred.len() != self.mistakes.len() {
            return Err(Error::DimensionMismatch { expected: self.mistakes.len(), actual: erred.len() });
        }
        for (m, &e) in self.mistakes.iter_mut().zip(erred) {
            *m += u64::from(e);
        }
        Ok(())
    }
}

fn normalized_exp(logw: &[f64]) -> Vec<f64> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Index drawn with probability ∝ `exp(logw[i])`, from one uniform.
pub fn sample_log_weights<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, v) in w.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    // rounding can leave u just past the last partial sum
    w.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// Exponential weights over `n` experts for a known horizon, with expert
/// `i` charged `w_t·C_t[y_t, f^i_t]` each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaState {
    horizon: usize,
    eta: f64,
    costs: Vec<f64>,
    t: usize,
}

impl LeaState {
    pub fn new(n: usize, horizon: usize) -> Result<Self> {
        if n == 0 || horizon == 0 {
            return Err(Error::InvalidParameter("LEA needs at least one expert and one round".into()));
        }
        let eta = (8.0 * (n as f64).ln() / horizon as f64).sqrt();
        Ok(LeaState { horizon, eta, costs: vec![0.0; n], t: 0 })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Picks the expert to follow this round.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.t >= self.horizon {
            return Err(Error::HorizonExhausted(self.horizon));
        }
        let logw: Vec<f64> = self.costs.iter().map(|c| -self.eta * c).collect();
        Ok(sample_log_weights(&logw, rng))
    }

    /// Charges every expert for its advice once `y` is known.
    pub fn update(&mut self, advice: &[Label], w: f64, cost: &CostMatrix, y: Label) -> Result<()> {
        if self.t >= self.horizon {
            return Err(Error::HorizonExhausted(self.horizon));
        }
        if advice.len() != self.costs.len() {
            return Err(Error::DimensionMismatch { expected: self.costs.len(), actual: advice.len() });
        }
        check_weight(w)?;
        for (c, &a) in self.costs.iter_mut().zip(advice) {
            *c += w * cost.cost(y, a);
        }
        self.t += 1;
        Ok(())
    }

    /// One full round: select, predict the chosen advice, update.
    pub fn round<R: Rng + ?Sized>(
        &mut self,
        advice: &[Label],
        w: f64,
        cost: &CostMatrix,
        y: Label,
        rng: &mut R,
    ) -> Result<Label> {
        if advice.len() != self.costs.len() {
            return Err(Error::DimensionMismatch { expected: self.costs.len(), actual: advice.len() });
        }
        let i = self.select(rng)?;
        let pred = advice[i];
        self.update(advice, w, cost, y)?;
        Ok(pred)
    }
}

/// LEA for streams of unknown length: restarts with a doubled horizon each
/// time the current one runs out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingLea {
    n: usize,
    inner: LeaState,
}

impl DoublingLea {
    pub fn new(n: usize, initial_horizon: usize) -> Result<Self> {
        Ok(DoublingLea { n, inner: LeaState::new(n, initial_horizon)? })
    }

    pub fn current(&self) -> &LeaState {
        &self.inner
    }

    pub fn round<R: Rng + ?Sized>(
        &mut self,
        advice: &[Label],
        w: f64,
        cost: &CostMatrix,
        y: Label,
        rng: &mut R,
    ) -> Result<Label> {
        if self.inner.rounds() >= self.inner.horizon() {
            self.inner = LeaState::new(self.n, self.inner.horizon() * 2)?;
        }
        self.inner.round(advice, w, cost, y, rng)
    }
}
