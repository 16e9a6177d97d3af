use crate::domain::{Label, LabelSpace};
use crate::error::{Error, Result};

use super::WeakLearner;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

/// Weighted running mean and second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    mean: f64,
    m2: f64,
}

/// Gaussian naive Bayes with importance-weighted sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineNaiveBayes {
    space: LabelSpace,
    dim: usize,
    variance_floor: f64,
    class_weight: Vec<f64>,
    /// `moments[c * dim + j]`
    moments: Vec<Moments>,
}

impl OnlineNaiveBayes {
    pub fn new(space: LabelSpace, dim: usize) -> Self {
        Self::with_variance_floor(space, dim, DEFAULT_VARIANCE_FLOOR)
    }

    pub fn with_variance_floor(space: LabelSpace, dim: usize, variance_floor: f64) -> Self {
        OnlineNaiveBayes {
            space,
            dim,
            variance_floor,
            class_weight: vec![0.0; space.k()],
            moments: vec![Moments::default(); space.k() * dim],
        }
    }

    /// Class priors with add-one smoothing.
    pub fn priors(&self) -> Vec<f64> {
        let total: f64 = self.class_weight.iter().sum();
        let k = self.space.k() as f64;
        self.class_weight.iter().map(|w| (w + 1.0) / (total + k)).collect()
    }

    pub fn mean(&self, class: Label, feature: usize) -> f64 {
        self.moments[class.index() * self.dim + feature].mean
    }

    pub fn variance(&self, class: Label, feature: usize) -> f64 {
        let w = self.class_weight[class.index()];
        let m = self.moments[class.index() * self.dim + feature];
        if w > 0.0 {
            (m.m2 / w).max(self.variance_floor)
        } else {
            self.variance_floor
        }
    }
}

impl WeakLearner for OnlineNaiveBayes {
    fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        let priors = self.priors();
        let mut best: Option<(f64, usize)> = None;
        for c in 0..self.space.k() {
            // classes never seen have no likelihood model
            if self.class_weight[c] <= 0.0 {
                continue;
            }
            let mut score = priors[c].ln();
            for (j, &v) in x.iter().enumerate() {
                let var = self.variance(Label::from_index(c), j);
                let d = v - self.moments[c * self.dim + j].mean;
                score -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
            }
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, c));
            }
        }
        Ok(Label::from_index(best.map_or(0, |(_, c)| c)))
    }

    fn learn(&mut self, x: &[f64], y: Label, w: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        self.space.check(y)?;
        crate::domain::check_weight(w)?;
        if w == 0.0 {
            return Ok(());
        }
        let c = y.index();
        let total = self.class_weight[c] + w;
        for (j, &v) in x.iter().enumerate() {
            let m = &mut self.moments[c * self.dim + j];
            let delta = v - m.mean;
            m.mean += delta * w / total;
            m.m2 += w * delta * (v - m.mean);
        }
        self.class_weight[c] = total;
        Ok(())
    }
}
