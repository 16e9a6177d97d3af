use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{EdgeDistribution, Example, Label, LabelSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AdversaryMode {
    /// Every coordinate agrees with the label at edge `edge` from round 1.
    ConstantEdge { edge: f64 },
    /// Pure noise for the first `t0` rounds, then edge `2γ`.
    TwoPhase { gamma: f64, t0: usize },
}

/// `⌊kS/(4γ)⌋`, the length of the noise phase.
pub fn two_phase_boundary(k: usize, gamma: f64, excess: f64) -> usize {
    // the small epsilon keeps exact products like 3·30/0.4 from landing at 224.999…
    (k as f64 * excess / (4.0 * gamma) + 1e-9).floor() as usize
}

/// Seeded generator of label-valued feature vectors: `y` uniform on `[k]`,
/// then `n` coordinates drawn i.i.d. from `u^y_edge`.
#[derive(Debug, Clone)]
pub struct AdversaryStream {
    space: LabelSpace,
    n: usize,
    mode: AdversaryMode,
    rng: ChaCha8Rng,
    t: usize,
}

impl AdversaryStream {
    pub fn new(space: LabelSpace, n: usize, mode: AdversaryMode, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("adversary needs at least one coordinate".into()));
        }
        let edge = match mode {
            AdversaryMode::ConstantEdge { edge } => edge,
            AdversaryMode::TwoPhase { gamma, .. } => {
                if gamma <= 0.0 {
                    return Err(Error::InvalidParameter(format!("two-phase edge {gamma} must be positive")));
                }
                2.0 * gamma
            }
        };
        if !(0.0..1.0).contains(&edge) {
            return Err(Error::InvalidParameter(format!("planted edge {edge} outside [0, 1)")));
        }
        Ok(AdversaryStream { space, n, mode, rng: ChaCha8Rng::seed_from_u64(seed), t: 0 })
    }

    /// Two-phase stream with `T₀` derived from the excess loss `S`.
    pub fn two_phase(space: LabelSpace, n: usize, gamma: f64, excess: f64, seed: u64) -> Result<Self> {
        let t0 = two_phase_boundary(space.k(), gamma, excess);
        Self::new(space, n, AdversaryMode::TwoPhase { gamma, t0 }, seed)
    }

    pub fn space(&self) -> LabelSpace {
        self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> AdversaryMode {
        self.mode
    }

    /// Rounds produced so far.
    pub fn rounds(&self) -> usize {
        self.t
    }

    /// Edge in force for round `t` (1-based).
    pub fn edge_at(&self, t: usize) -> f64 {
        match self.mode {
            AdversaryMode::ConstantEdge { edge } => edge,
            AdversaryMode::TwoPhase { gamma, t0 } => {
                if t <= t0 {
                    0.0
                } else {
                    2.0 * gamma
                }
            }
        }
    }

    pub fn next_example(&mut self) -> Example {
        self.t += 1;
        let k = self.space.k();
        let y = Label::from_index(self.rng.gen_range(0..k));
        let dist = EdgeDistribution::new(k, self.edge_at(self.t), y).expect("edge validated at construction");
        let features = (0..self.n).map(|_| dist.sample(&mut self.rng).one_based() as f64).collect();
        Example::unweighted(features, y)
    }
}

impl Iterator for AdversaryStream {
    type Item = Example;

    fn next(&mut self) -> Option<Example> {
        Some(self.next_example())
    }
}
