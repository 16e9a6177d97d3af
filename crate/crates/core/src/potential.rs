//! Edge-over-random potentials `φ^r_i(s)` for the multiclass 0-1 loss.
//!
//! `φ^r_i(s)` is the probability that `r` fails to strictly win after `i`
//! more votes drawn i.i.d. from `u^r_γ` are added to `s`. Only the gaps
//! `s[r] - s[l]` matter, and the distribution is symmetric over the
//! non-favored labels, so the memo is keyed on the sorted gap multiset.

use dashmap::DashMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::domain::{EdgeDistribution, Label};
use crate::error::{Error, Result};

/// Default limit on memoized entries before the exact engine gives up.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

/// Default constant in the `c·k^{5/2}/√(N−i)` weight bound.
pub const DEFAULT_WEIGHT_BOUND_CONSTANT: f64 = 8.0;

/// 1 iff some wrong label ties or beats `r`.
pub fn zero_one_loss<T: PartialOrd + Copy>(r: Label, s: &[T]) -> u8 {
    let sr = s[r.index()];
    let lost = s.iter().enumerate().any(|(l, &v)| l != r.index() && v >= sr);
    u8::from(lost)
}

/// `(k-1)·exp(-γ²N/2)`, an upper bound on `φ^1_N(0)`.
pub fn asymptotic_error_bound(k: usize, gamma: f64, n: usize) -> f64 {
    (k as f64 - 1.0) * (-gamma * gamma * n as f64 / 2.0).exp()
}

/// Bound on `‖w^i‖_∞` for learner `i` of `n`: `min(k, c·k^{5/2}/√(n−i))`,
/// or just `k` for the last learner. `gamma` must be below 1/2 for the
/// asymptotic form to hold; it does not enter the value.
pub fn weight_norm_bound(k: usize, gamma: f64, n: usize, i: usize, c: f64) -> f64 {
    debug_assert!((1..=n).contains(&i));
    debug_assert!(gamma < 0.5);
    let kf = k as f64;
    if i >= n {
        return kf;
    }
    kf.min(c * kf.powf(2.5) / ((n - i) as f64).sqrt())
}

fn check_params(k: usize, gamma: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("edge {gamma} outside [0, 0.5)")));
    }
    Ok(())
}

/// Gaps `s[r] - s[l]` for `l != r`, sorted ascending.
fn gaps_of(r: Label, s: &[i64]) -> SmallVec<[i64; 8]> {
    let sr = s[r.index()];
    let mut gaps: SmallVec<[i64; 8]> =
        s.iter().enumerate().filter(|&(l, _)| l != r.index()).map(|(_, &v)| sr - v).collect();
    gaps.sort_unstable();
    gaps
}

/// Canonical memo key: remaining draws plus sorted, clipped gaps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GapKey {
    pub i: u32,
    pub gaps: SmallVec<[i32; 8]>,
}

impl GapKey {
    pub fn new(r: Label, i: usize, s: &[i64]) -> Self {
        let gaps = gaps_of(r, s);
        Self::from_sorted(i as i64, &gaps)
    }

    fn from_sorted(i: i64, gaps: &[i64]) -> Self {
        let bound = i + 1;
        GapKey { i: i as u32, gaps: gaps.iter().map(|&d| d.clamp(-bound, bound) as i32).collect() }
    }

    /// 16 bits for `i`, 16 per gap. Fits when k ≤ 8 and all values are small.
    fn pack(&self) -> Option<u128> {
        if self.gaps.len() > 7 || self.i > u16::MAX as u32 {
            return None;
        }
        let mut key = self.i as u128;
        for (j, &d) in self.gaps.iter().enumerate() {
            let off = i64::from(d) + 0x8000;
            if !(0..=0xffff).contains(&off) {
                return None;
            }
            key |= (off as u128) << (16 * (j + 1));
        }
        Some(key)
    }

    fn unpack(key: u128, n_gaps: usize) -> Self {
        let i = (key & 0xffff) as u32;
        let gaps = (0..n_gaps).map(|j| ((key >> (16 * (j + 1))) & 0xffff) as i32 - 0x8000).collect();
        GapKey { i, gaps }
    }
}

/// Rough count of memo entries needed for a run of `n` learners: the
/// number of sorted gap multisets at each level, with gaps confined to the
/// window that is still undecided.
pub fn estimate_states(k: usize, n: usize) -> f64 {
    (0..=n)
        .map(|j| {
            let m = j.min(n - j + 1) as f64;
            binomial(2.0 * m + 1.0 + k as f64 - 2.0, k as f64 - 1.0)
        })
        .sum()
}

fn binomial(n: f64, r: f64) -> f64 {
    if r < 0.0 || r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0;
    let mut j = 0.0;
    while j < r {
        acc *= (n - j) / (j + 1.0);
        j += 1.0;
    }
    acc
}

enum Memo {
    Packed(DashMap<u128, f64>),
    General(DashMap<GapKey, f64>),
}

/// Memoized exact potentials for fixed `(k, γ)`.
///
/// Safe to share between threads. Two threads racing on one key compute the
/// same value, so the first insert wins without changing anything.
pub struct PotentialTable {
    k: usize,
    gamma: f64,
    favored: f64,
    other: f64,
    cap: usize,
    memo: Memo,
}

impl std::fmt::Debug for PotentialTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialTable")
            .field("k", &self.k)
            .field("gamma", &self.gamma)
            .field("cap", &self.cap)
            .field("len", &self.len())
            .finish()
    }
}

impl PotentialTable {
    pub fn new(k: usize, gamma: f64) -> Result<Self> {
        Self::with_cap(k, gamma, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(k: usize, gamma: f64, cap: usize) -> Result<Self> {
        check_params(k, gamma)?;
        let other = (1.0 - gamma) / k as f64;
        let memo = if k <= 8 { Memo::Packed(DashMap::new()) } else { Memo::General(DashMap::new()) };
        Ok(PotentialTable { k, gamma, favored: other + gamma, other, cap, memo })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        match &self.memo {
            Memo::Packed(m) => m.len(),
            Memo::General(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact `φ^r_i(s)`.
    pub fn exact(&self, r: Label, i: usize, s: &[i64]) -> Result<f64> {
        if s.len() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, actual: s.len() });
        }
        if r.index() >= self.k {
            return Err(Error::LabelOutOfRange { label: r.one_based(), k: self.k });
        }
        let gaps = gaps_of(r, s);
        self.value(i as i64, &gaps)
    }

    fn lookup(&self, key: &GapKey) -> Option<f64> {
        match &self.memo {
            Memo::Packed(m) => key.pack().and_then(|p| m.get(&p).map(|v| *v)),
            Memo::General(m) => m.get(key).map(|v| *v),
        }
    }

    fn store(&self, key: GapKey, v: f64) -> Result<()> {
        if self.len() >= self.cap {
            return Err(Error::ResourceLimit { cap: self.cap });
        }
        match &self.memo {
            Memo::Packed(m) => match key.pack() {
                Some(p) => {
                    m.entry(p).or_insert(v);
                }
                None => return Err(Error::ResourceLimit { cap: self.cap }),
            },
            Memo::General(m) => {
                m.entry(key).or_insert(v);
            }
        }
        Ok(())
    }

    /// `gaps` is sorted ascending.
    fn value(&self, i: i64, gaps: &[i64]) -> Result<f64> {
        // the smallest gap can rise by at most i, each gap can fall by at most i
        if gaps[0] + i <= 0 {
            return Ok(1.0);
        }
        if gaps[0] > i {
            return Ok(0.0);
        }
        // gaps above i can never close; clipping them first makes the
        // arithmetic below a function of the key alone
        let mut g: SmallVec<[i64; 8]> = gaps.iter().map(|&d| d.min(i + 1)).collect();
        let key = GapKey::from_sorted(i, &g);
        if let Some(v) = self.lookup(&key) {
            return Ok(v);
        }

        let up: SmallVec<[i64; 8]> = g.iter().map(|&d| d + 1).collect();
        let up = self.value(i - 1, &up)?;

        let mut down = 0.0;
        let mut j = 0;
        while j < g.len() {
            let mut run = 1;
            while j + run < g.len() && g[j + run] == g[j] {
                run += 1;
            }
            // lowering the first entry of a run of equal gaps keeps the order
            g[j] -= 1;
            let v = self.value(i - 1, &g);
            g[j] += 1;
            down += run as f64 * v?;
            j += run;
        }

        let v = self.favored * up + self.other * down;
        self.store(key, v)?;
        Ok(v)
    }

    /// Snapshot of the memo in key order.
    pub fn entries(&self) -> Vec<(GapKey, f64)> {
        let mut out: Vec<(GapKey, f64)> = match &self.memo {
            Memo::Packed(m) => m.iter().map(|e| (GapKey::unpack(*e.key(), self.k - 1), *e.value())).collect(),
            Memo::General(m) => m.iter().map(|e| (e.key().clone(), *e.value())).collect(),
        };
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// `φ^r_i(s)` via the explicit multinomial sum over final vote counts.
/// Exponential in `k`; meant for cross-checking small instances.
pub fn potential_multinomial(k: usize, gamma: f64, r: Label, i: usize, s: &[i64]) -> Result<f64> {
    check_params(k, gamma)?;
    if s.len() != k {
        return Err(Error::DimensionMismatch { expected: k, actual: s.len() });
    }
    let probs = EdgeDistribution::new(k, gamma, r)?.masses();
    let log_fact: Vec<f64> = (0..=i)
        .scan(0.0, |acc, n| {
            if n > 0 {
                *acc += (n as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    let mut x = vec![0usize; k];
    let mut win = 0.0;
    compositions(i, 0, &mut x, &mut |x| {
        let sr = s[r.index()] + x[r.index()] as i64;
        let wins = (0..k).all(|l| l == r.index() || s[l] + (x[l] as i64) < sr);
        if wins {
            let mut log_p = log_fact[i];
            for l in 0..k {
                log_p -= log_fact[x[l]];
                if x[l] > 0 {
                    log_p += x[l] as f64 * probs[l].ln();
                }
            }
            win += log_p.exp();
        }
    });
    Ok(1.0 - win)
}

fn compositions(remaining: usize, pos: usize, x: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if pos + 1 == x.len() {
        x[pos] = remaining;
        f(x);
        return;
    }
    for v in 0..=remaining {
        x[pos] = v;
        compositions(remaining - v, pos + 1, x, f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of `φ^r_i(s)` from `n_samples` simulated futures.
pub fn potential_mc(
    k: usize,
    gamma: f64,
    r: Label,
    i: usize,
    s: &[i64],
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let row = potential_mc_row(k, gamma, r, i, &[s.to_vec()], n_samples, seed)?;
    Ok(row[0])
}

/// Estimates `φ^r_i` at several vote vectors from the same simulated
/// futures. Sharing draws keeps pairwise differences sign-consistent with
/// the exact values, since the loss is monotone in every coordinate.
pub fn potential_mc_row(
    k: usize,
    gamma: f64,
    r: Label,
    i: usize,
    points: &[Vec<i64>],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    check_params(k, gamma)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    for p in points {
        if p.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: p.len() });
        }
    }
    let dist = EdgeDistribution::new(k, gamma, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0i64; k];
    let mut hits = vec![0u64; points.len()];
    let mut buf = vec![0i64; k];
    for _ in 0..n_samples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..i {
            counts[dist.sample(&mut rng).index()] += 1;
        }
        for (h, p) in hits.iter_mut().zip(points) {
            for l in 0..k {
                buf[l] = p[l] + counts[l];
            }
            *h += u64::from(zero_one_loss(r, &buf));
        }
    }
    let n = n_samples as f64;
    Ok(hits
        .into_iter()
        .map(|h| {
            let mean = h as f64 / n;
            // 0/1 outcomes: sample variance is n/(n-1)·p(1-p)
            let stderr = if n_samples > 1 { (mean * (1.0 - mean) / (n - 1.0)).sqrt() } else { 0.0 };
            McEstimate { estimate: mean, stderr }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    Exact,
    MonteCarlo,
}

/// Picks exact DP or Monte Carlo for a run of `n` learners and serves rows
/// of potentials to the booster.
#[derive(Debug)]
pub struct PotentialEngine {
    table: std::sync::Arc<PotentialTable>,
    mode: PotentialMode,
    mc_samples: usize,
    mc_seed: u64,
}

impl PotentialEngine {
    /// Exact mode if the estimated state count fits the table's cap.
    pub fn for_run(table: std::sync::Arc<PotentialTable>, n: usize, mc_samples: usize, mc_seed: u64) -> Self {
        let mode = if estimate_states(table.k(), n) <= table.cap() as f64 {
            PotentialMode::Exact
        } else {
            PotentialMode::MonteCarlo
        };
        PotentialEngine { table, mode, mc_samples: mc_samples.max(1), mc_seed }
    }

    pub fn with_mode(mut self, mode: PotentialMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> PotentialMode {
        self.mode
    }

    pub fn table(&self) -> &PotentialTable {
        &self.table
    }

    pub fn k(&self) -> usize {
        self.table.k()
    }

    pub fn gamma(&self) -> f64 {
        self.table.gamma()
    }

    /// `[φ^r_i(s + e_l) for l in 0..k]`. `stream` identifies the call site
    /// (round, learner, row) so Monte Carlo draws are reproducible.
    pub fn row(&self, r: Label, i: usize, s: &[i64], stream: (u64, u64, u64)) -> Result<Vec<f64>> {
        let k = self.k();
        let mut points: Vec<Vec<i64>> = Vec::with_capacity(k);
        for l in 0..k {
            let mut p = s.to_vec();
            p[l] += 1;
            points.push(p);
        }
        match self.mode {
            PotentialMode::Exact => points.iter().map(|p| self.table.exact(r, i, p)).collect(),
            PotentialMode::MonteCarlo => {
                let seed = derive_seed(self.mc_seed, stream);
                let est = potential_mc_row(k, self.gamma(), r, i, &points, self.mc_samples, seed)?;
                Ok(est.into_iter().map(|e| e.estimate).collect())
            }
        }
    }
}

/// splitmix64 fold of a base seed with a small tuple.
pub fn derive_seed(base: u64, (a, b, c): (u64, u64, u64)) -> u64 {
    let mut x = base;
    for v in [a, b, c] {
        x ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = splitmix(x);
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
