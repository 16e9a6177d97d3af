use crate::domain::{Label, LabelSpace};
use crate::error::{Error, Result};

use super::WeakLearner;

/// Reads its prediction off one coordinate of an adversary example. The
/// adversary encodes labels as 1-based floats.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOracleLearner {
    index: usize,
    space: LabelSpace,
}

impl EdgeOracleLearner {
    /// `index` is 1-based.
    pub fn new(index: usize, space: LabelSpace) -> Result<Self> {
        if index == 0 {
            return Err(Error::InvalidParameter("oracle coordinate index is 1-based".into()));
        }
        Ok(EdgeOracleLearner { index, space })
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

impl WeakLearner for EdgeOracleLearner {
    fn predict(&self, x: &[f64]) -> Result<Label> {
        let v = *x.get(self.index - 1).ok_or(Error::FeatureIndex { index: self.index, len: x.len() })?;
        let k = self.space.k();
        if v.fract() != 0.0 || v < 1.0 || v > k as f64 {
            return Err(Error::InvalidParameter(format!("coordinate value {v} is not a label in [1..{k}]")));
        }
        Label::from_one_based(v as usize, k)
    }

    fn learn(&mut self, _x: &[f64], _y: Label, _w: f64) -> Result<()> {
        Ok(())
    }
}
