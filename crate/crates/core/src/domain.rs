//! Shared domain types: labels, examples, cost matrices, vote vectors and
//! the edge-over-random label distribution.
//!
//! Labels are stored 0-based. Everything user-facing (Display, CSV, JSON
//! logs) shows them 1-based, so label `Label(0)` prints as `1`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for the unit row-norm check on edge-over-random rows.
pub const ROW_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "usize", try_from = "usize")]
pub struct Label(usize);

impl Label {
    pub const fn from_index(index: usize) -> Self {
        Label(index)
    }

    /// Builds a label from its 1-based presentation.
    pub fn from_one_based(label: usize, k: usize) -> Result<Self> {
        if label == 0 || label > k {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Label(label - 1))
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn one_based(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.one_based())
    }
}

impl From<Label> for usize {
    fn from(l: Label) -> usize {
        l.one_based()
    }
}

impl TryFrom<usize> for Label {
    type Error = String;

    fn try_from(v: usize) -> std::result::Result<Self, Self::Error> {
        if v == 0 {
            Err("labels are 1-based".to_string())
        } else {
            Ok(Label(v - 1))
        }
    }
}

/// The label set `[k]`, fixed up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSpace {
    k: usize,
}

impl LabelSpace {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        Ok(LabelSpace { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        (0..self.k).map(Label)
    }

    pub fn contains(&self, label: Label) -> bool {
        label.0 < self.k
    }

    pub fn check(&self, label: Label) -> Result<()> {
        if self.contains(label) {
            Ok(())
        } else {
            Err(Error::LabelOutOfRange { label: label.one_based(), k: self.k })
        }
    }
}

/// One labelled, weighted observation of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: Label,
    pub weight: f64,
}

impl Example {
    pub fn new(features: Vec<f64>, label: Label, weight: f64) -> Result<Self> {
        check_weight(weight)?;
        Ok(Example { features, label, weight })
    }

    pub fn unweighted(features: Vec<f64>, label: Label) -> Self {
        Example { features, label, weight: 1.0 }
    }
}

pub(crate) fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::WeightOutOfRange(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// Zero diagonal, non-negative entries, rows of unit L1 norm or all zero.
    EorNormalized,
    /// Row `r` is the gradient of a proper surrogate loss `L^r`.
    Gradient,
}

/// A k×k cost matrix stored row-major. Entry `[r, l]` is the cost of
/// predicting `l` when the truth is `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    k: usize,
    entries: Vec<f64>,
    kind: CostKind,
}

impl CostMatrix {
    pub fn zeros(k: usize, kind: CostKind) -> Self {
        CostMatrix { k, entries: vec![0.0; k * k], kind }
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: CostKind) -> Result<Self> {
        let k = rows.len();
        let mut entries = Vec::with_capacity(k * k);
        for row in rows {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Ok(CostMatrix { k, entries, kind })
    }

    /// The uniform edge-over-random matrix: every off-diagonal entry 1/(k-1).
    pub fn uniform_eor(k: usize) -> Self {
        let mut m = CostMatrix::zeros(k, CostKind::EorNormalized);
        let v = 1.0 / (k as f64 - 1.0);
        for r in 0..k {
            for l in 0..k {
                if r != l {
                    m.set(r, l, v);
                }
            }
        }
        m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, r: usize, l: usize) -> f64 {
        self.entries[r * self.k + l]
    }

    #[inline]
    pub fn set(&mut self, r: usize, l: usize, v: f64) {
        self.entries[r * self.k + l] = v;
    }

    #[inline]
    pub fn cost(&self, truth: Label, predicted: Label) -> f64 {
        self.get(truth.index(), predicted.index())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.k..(r + 1) * self.k]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.entries[r * self.k..(r + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.k)
    }
}

/// Cumulative (possibly weighted) votes `s` over the k labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteVector(pub Vec<f64>);

impl VoteVector {
    pub fn zeros(k: usize) -> Self {
        VoteVector(vec![0.0; k])
    }

    pub fn add(&mut self, label: Label, amount: f64) {
        self.0[label.index()] += amount;
    }

    pub fn argmax(&self) -> Label {
        argmax_label(&self.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the largest coordinate; ties go to the lowest index.
pub fn argmax_label<T: PartialOrd + Copy>(s: &[T]) -> Label {
    let mut best = 0;
    for (i, v) in s.iter().enumerate().skip(1) {
        if *v > s[best] {
            best = i;
        }
    }
    Label(best)
}

/// The edge-over-random distribution `u^l_γ`: uniform over `[k]` with
/// `γ` extra mass on the favored label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDistribution {
    k: usize,
    gamma: f64,
    favored: Label,
}

impl EdgeDistribution {
    pub fn new(k: usize, gamma: f64, favored: Label) -> Result<Self> {
        LabelSpace::new(k)?.check(favored)?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("edge {gamma} outside [0, 1)")));
        }
        Ok(EdgeDistribution { k, gamma, favored })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn favored(&self) -> Label {
        self.favored
    }

    pub fn base_mass(&self) -> f64 {
        (1.0 - self.gamma) / self.k as f64
    }

    pub fn mass(&self, label: Label) -> f64 {
        if label == self.favored {
            self.base_mass() + self.gamma
        } else {
            self.base_mass()
        }
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.k).map(|l| self.mass(Label(l))).collect()
    }

    /// Draws one label. Consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Label {
        let u: f64 = rng.gen();
        let base = self.base_mass();
        // favored label first, then the rest in index order
        let favored_mass = base + self.gamma;
        if u < favored_mass {
            return self.favored;
        }
        let rest = ((u - favored_mass) / base) as usize;
        let rest = rest.min(self.k - 2);
        let idx = if rest < self.favored.0 { rest } else { rest + 1 };
        Label(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonZeroDiagonal { row: usize, value: f64 },
    NegativeEntry { row: usize, col: usize, value: f64 },
    RowNorm { row: usize, norm: f64 },
    DiagonalNotRowSum { row: usize, diagonal: f64, expected: f64 },
    DiagonalNotMinimum { row: usize },
    NonFinite { row: usize, col: usize },
}

/// Per-row invariant violations; empty iff the matrix is valid for its kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `cost` against the invariants of its declared kind.
pub fn validate_cost_matrix(cost: &CostMatrix, space: LabelSpace) -> Result<ValidityReport> {
    let k = space.k();
    if cost.k() != k || cost.entries.len() != k * k {
        return Err(Error::DimensionMismatch { expected: k, actual: cost.k() });
    }
    let mut report = ValidityReport::default();
    for r in 0..k {
        let row = cost.row(r);
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            report.violations.push(Violation::NonFinite { row: r, col });
            continue;
        }
        match cost.kind() {
            CostKind::EorNormalized => {
                if row[r] != 0.0 {
                    report.violations.push(Violation::NonZeroDiagonal { row: r, value: row[r] });
                }
                for (l, &v) in row.iter().enumerate() {
                    if v < 0.0 {
                        report.violations.push(Violation::NegativeEntry { row: r, col: l, value: v });
                    }
                }
                let norm: f64 = row.iter().map(|v| v.abs()).sum();
                let zero_row = row.iter().all(|&v| v == 0.0);
                if !zero_row && (norm - 1.0).abs() > ROW_NORM_TOLERANCE {
                    report.violations.push(Violation::RowNorm { row: r, norm });
                }
            }
            CostKind::Gradient => {
                let off: f64 = row.iter().enumerate().filter(|&(l, _)| l != r).map(|(_, v)| v).sum();
                for (l, &v) in row.iter().enumerate() {
                    if l != r && v < 0.0 {
                        report.violations.push(Violation::NegativeEntry { row: r, col: l, value: v });
                    }
                }
                let tol = ROW_NORM_TOLERANCE * off.abs().max(1.0);
                if (row[r] + off).abs() > tol {
                    report.violations.push(Violation::DiagonalNotRowSum { row: r, diagonal: row[r], expected: -off });
                }
                if row.iter().any(|&v| v < row[r]) {
                    report.violations.push(Violation::DiagonalNotMinimum { row: r });
                }
            }
        }
    }
    Ok(report)
}
