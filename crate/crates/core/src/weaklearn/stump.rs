use crate::domain::{argmax_label, Label, LabelSpace};
use crate::error::{Error, Result};

use super::WeakLearner;

pub const DEFAULT_MAX_BINS: usize = 32;
pub const DEFAULT_REFRESH_PERIOD: usize = 50;

/// A histogram bin: a representative value and the weight per class that
/// fell near it.
#[derive(Debug, Clone, PartialEq)]
struct Centroid {
    value: f64,
    counts: Vec<f64>,
}

impl Centroid {
    fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Streaming histogram with a bounded number of bins. New values get their
/// own bin; when there are too many, the two closest bins merge.
#[derive(Debug, Clone, PartialEq)]
struct Histogram {
    bins: Vec<Centroid>,
    max_bins: usize,
}

impl Histogram {
    fn new(max_bins: usize) -> Self {
        Histogram { bins: Vec::with_capacity(max_bins + 1), max_bins }
    }

    fn insert(&mut self, value: f64, class: usize, w: f64, k: usize) {
        let pos = self.bins.partition_point(|c| c.value < value);
        if let Some(c) = self.bins.get_mut(pos) {
            if c.value == value {
                c.counts[class] += w;
                return;
            }
        }
        let mut counts = vec![0.0; k];
        counts[class] = w;
        self.bins.insert(pos, Centroid { value, counts });
        if self.bins.len() > self.max_bins {
            self.merge_closest();
        }
    }

    fn merge_closest(&mut self) {
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for j in 0..self.bins.len() - 1 {
            let gap = self.bins[j + 1].value - self.bins[j].value;
            if gap < best_gap {
                best_gap = gap;
                best = j;
            }
        }
        let right = self.bins.remove(best + 1);
        let left = &mut self.bins[best];
        let (wl, wr) = (left.total(), right.total());
        if wl + wr > 0.0 {
            left.value = (left.value * wl + right.value * wr) / (wl + wr);
        } else {
            left.value = 0.5 * (left.value + right.value);
        }
        for (a, b) in left.counts.iter_mut().zip(&right.counts) {
            *a += b;
        }
    }
}

/// `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpRule {
    pub feature: usize,
    pub threshold: f64,
    pub left: Label,
    pub right: Label,
}

/// Online decision stump. Keeps a per-feature class histogram and
/// periodically re-picks the single split with the lowest weighted
/// misclassification mass.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStump {
    space: LabelSpace,
    dim: usize,
    refresh_period: usize,
    histograms: Vec<Histogram>,
    class_weight: Vec<f64>,
    updates: usize,
    rule: Option<StumpRule>,
}

impl OnlineStump {
    pub fn new(space: LabelSpace, dim: usize) -> Self {
        Self::with_params(space, dim, DEFAULT_REFRESH_PERIOD, DEFAULT_MAX_BINS)
    }

    pub fn with_params(space: LabelSpace, dim: usize, refresh_period: usize, max_bins: usize) -> Self {
        let max_bins = max_bins.max(2);
        OnlineStump {
            space,
            dim,
            refresh_period: refresh_period.max(1),
            histograms: (0..dim).map(|_| Histogram::new(max_bins)).collect(),
            class_weight: vec![0.0; space.k()],
            updates: 0,
            rule: None,
        }
    }

    pub fn rule(&self) -> Option<StumpRule> {
        self.rule
    }

    pub fn refresh_period(&self) -> usize {
        self.refresh_period
    }

    /// Re-picks the split from the current statistics.
    pub fn refresh(&mut self) {
        let k = self.space.k();
        let total: f64 = self.class_weight.iter().sum();
        if total <= 0.0 {
            return;
        }
        let majority = argmax_label(&self.class_weight);
        let mut best: Option<(f64, StumpRule)> = None;
        let mut left = vec![0.0; k];
        for (f, h) in self.histograms.iter().enumerate() {
            left.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..h.bins.len().saturating_sub(1) {
                for (a, b) in left.iter_mut().zip(&h.bins[j].counts) {
                    *a += b;
                }
                let right: Vec<f64> = self.class_weight.iter().zip(&left).map(|(t, l)| t - l).collect();
                let (err_l, lab_l) = side_error(&left, majority);
                let (err_r, lab_r) = side_error(&right, majority);
                let err = err_l + err_r;
                if best.as_ref().is_none_or(|(e, _)| err < *e) {
                    let threshold = 0.5 * (h.bins[j].value + h.bins[j + 1].value);
                    best = Some((err, StumpRule { feature: f, threshold, left: lab_l, right: lab_r }));
                }
            }
        }
        self.rule = Some(match best {
            Some((_, rule)) => rule,
            None => StumpRule { feature: 0, threshold: f64::INFINITY, left: majority, right: majority },
        });
    }
}

/// Weight not in the side's majority class, and that class. Empty sides
/// fall back to the overall majority.
fn side_error(counts: &[f64], fallback: Label) -> (f64, Label) {
    let total: f64 = counts.iter().sum();
    if total <= 1e-12 {
        return (0.0, fallback);
    }
    let lab = argmax_label(counts);
    (total - counts[lab.index()], lab)
}

impl WeakLearner for OnlineStump {
    fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        Ok(match self.rule {
            None => Label::from_index(0),
            Some(rule) => {
                if x[rule.feature] <= rule.threshold {
                    rule.left
                } else {
                    rule.right
                }
            }
        })
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
        let k = self.space.k();
        for (h, &v) in self.histograms.iter_mut().zip(x) {
            h.insert(v, y.index(), w, k);
        }
        self.class_weight[y.index()] += w;
        self.updates += 1;
        if self.rule.is_none() || self.updates.is_multiple_of(self.refresh_period) {
            self.refresh();
        }
        Ok(())
    }
}
