//! Lower-bound simulations: boosters over oracle learners whose outputs are
//! drawn from a planted edge-over-random distribution.

use std::sync::Arc;

use mcboost::mbbm::{MbbmBooster, MbbmConfig};
use mcboost::olm::{LossVariant, OlmBooster, OlmConfig};
use mcboost::potential::{
    asymptotic_error_bound, derive_seed, potential_mc, zero_one_loss, PotentialTable, DEFAULT_STATE_CAP,
};
use mcboost::weaklearn::{two_phase_boundary, AdversaryMode, AdversaryStream, EdgeOracleLearner};
use mcboost::{argmax_label, Error, Label, LabelSpace};
use rayon::prelude::*;

use crate::config::{SimBooster, SimMode, SimulateConfig};
use crate::error::{HarnessError, Result};

/// Futures simulated when the exact table for a grid point would exceed the
/// state cap.
const PHI_MC_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPoint {
    pub k: usize,
    /// Half the planted edge.
    pub gamma: f64,
    pub n: usize,
}

impl SimPoint {
    pub fn edge(&self) -> f64 {
        2.0 * self.gamma
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeedOutcome {
    /// Rounds compared against the potential (after the noise phase).
    pub scored: usize,
    pub mistakes: usize,
    pub vote_losses: usize,
    pub noise_mistakes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStats {
    pub t0: usize,
    pub mean_mistakes: f64,
    pub min_mistakes: usize,
    /// Fraction of seeds with at least `0.55·T₀` noise-phase mistakes.
    pub frac_above_055: f64,
    /// `(1 − 1/k)·T₀`, the expected mistakes of any predictor on pure noise.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub point: SimPoint,
    pub seeds: usize,
    pub scored_rounds: usize,
    pub error_rate: f64,
    /// Rate at which the unweighted vote of the learners failed to put the
    /// true label strictly ahead, the event `φ` measures.
    pub vote_loss_rate: f64,
    pub phi: f64,
    pub phi_exact: bool,
    /// `sqrt(φ(1 − φ)/rounds)` over all scored rounds of all seeds.
    pub pooled_se: f64,
    pub error_bound: f64,
    pub noise: Option<NoiseStats>,
    pub outcomes: Vec<SeedOutcome>,
}

impl SimReport {
    pub fn vote_loss_z(&self) -> f64 {
        if self.pooled_se > 0.0 {
            (self.vote_loss_rate - self.phi) / self.pooled_se
        } else {
            0.0
        }
    }

    pub fn within_3se(&self) -> bool {
        (self.vote_loss_rate - self.phi).abs() <= 3.0 * self.pooled_se
    }
}

pub fn grid(cfg: &SimulateConfig) -> Vec<SimPoint> {
    let mut out = Vec::new();
    for &k in &cfg.ks {
        for &gamma in &cfg.gammas {
            for &n in &cfg.ns {
                out.push(SimPoint { k, gamma, n });
            }
        }
    }
    out
}

/// `φ¹_N(0)` at the planted edge, exact when the table fits.
fn phi_at(point: &SimPoint, table: &PotentialTable, seed: u64) -> Result<(f64, bool)> {
    match table.exact(Label::from_index(0), point.n, &vec![0; point.k]) {
        Ok(v) => Ok((v, true)),
        Err(Error::ResourceLimit { .. }) => {
            let est = potential_mc(
                point.k,
                point.edge(),
                Label::from_index(0),
                point.n,
                &vec![0; point.k],
                PHI_MC_SAMPLES,
                seed,
            )?;
            Ok((est.estimate, false))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Vec<SimReport>> {
    let points = grid(cfg);
    let tables: Vec<Arc<PotentialTable>> = points
        .iter()
        .map(|p| PotentialTable::with_cap(p.k, p.edge(), DEFAULT_STATE_CAP).map(Arc::new))
        .collect::<std::result::Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.seeds).map(move |s| (p, s))).collect();
    let outcomes: Vec<SeedOutcome> = jobs
        .par_iter()
        .map(|&(p, s)| run_seed(cfg, &points[p], tables[p].clone(), point_seed(cfg.seed, &points[p], s)))
        .collect::<Result<_>>()?;

    points
        .iter()
        .enumerate()
        .map(|(pi, point)| {
            let mine: Vec<SeedOutcome> =
                jobs.iter().zip(&outcomes).filter(|((p, _), _)| *p == pi).map(|(_, o)| *o).collect();
            let (phi, phi_exact) = phi_at(point, &tables[pi], point_seed(cfg.seed, point, usize::MAX))?;
            let scored: usize = mine.iter().map(|o| o.scored).sum();
            let rate = |f: fn(&SeedOutcome) -> usize| {
                if scored == 0 {
                    f64::NAN
                } else {
                    mine.iter().map(f).sum::<usize>() as f64 / scored as f64
                }
            };
            let noise = (cfg.mode == SimMode::TwoPhase).then(|| {
                let t0 = two_phase_boundary(point.k, point.gamma, cfg.excess_for(point.k, point.gamma));
                let counts: Vec<usize> = mine.iter().map(|o| o.noise_mistakes).collect();
                let threshold = 0.55 * t0 as f64;
                NoiseStats {
                    t0,
                    mean_mistakes: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
                    min_mistakes: counts.iter().copied().min().unwrap_or(0),
                    frac_above_055: counts.iter().filter(|&&c| c as f64 >= threshold).count() as f64
                        / counts.len() as f64,
                    expected: (1.0 - 1.0 / point.k as f64) * t0 as f64,
                }
            });
            Ok(SimReport {
                point: *point,
                seeds: mine.len(),
                scored_rounds: scored,
                error_rate: rate(|o| o.mistakes),
                vote_loss_rate: rate(|o| o.vote_losses),
                phi,
                phi_exact,
                pooled_se: if scored == 0 { f64::NAN } else { (phi * (1.0 - phi) / scored as f64).sqrt() },
                error_bound: asymptotic_error_bound(point.k, point.edge(), point.n),
                noise,
                outcomes: mine,
            })
        })
        .collect()
}

fn point_seed(master: u64, p: &SimPoint, s: usize) -> u64 {
    let base = derive_seed(master, (p.k as u64, p.n as u64, p.gamma.to_bits()));
    derive_seed(base, (s as u64, 0, 0))
}

enum Booster {
    Majority,
    Mbbm(Box<MbbmBooster<EdgeOracleLearner>>),
    Olm(Box<OlmBooster<EdgeOracleLearner>>),
}

fn oracles(space: LabelSpace, n: usize) -> Result<Vec<EdgeOracleLearner>> {
    (1..=n).map(|i| EdgeOracleLearner::new(i, space).map_err(HarnessError::from)).collect()
}

/// Label-valued coordinates as vote counts.
fn vote_counts(x: &[f64], k: usize) -> Vec<i64> {
    let mut s = vec![0i64; k];
    for &v in x {
        s[v as usize - 1] += 1;
    }
    s
}

fn run_seed(cfg: &SimulateConfig, point: &SimPoint, table: Arc<PotentialTable>, seed: u64) -> Result<SeedOutcome> {
    let space = LabelSpace::new(point.k)?;
    let edge = point.edge();
    let (mut stream, t0) = match cfg.mode {
        SimMode::ConstantEdge => (AdversaryStream::new(space, point.n, AdversaryMode::ConstantEdge { edge }, seed)?, 0),
        SimMode::TwoPhase => {
            let s = cfg.excess_for(point.k, point.gamma);
            let t0 = two_phase_boundary(point.k, point.gamma, s);
            (AdversaryStream::new(space, point.n, AdversaryMode::TwoPhase { gamma: point.gamma, t0 }, seed)?, t0)
        }
    };
    let booster_seed = derive_seed(seed, (1, 0, 0));
    let mut booster = match cfg.booster {
        SimBooster::Majority => Booster::Majority,
        SimBooster::OnlineMbbm => {
            let mut mcfg = MbbmConfig::new(point.n, edge);
            mcfg.seed = booster_seed;
            Booster::Mbbm(Box::new(MbbmBooster::with_table(space, &mcfg, oracles(space, point.n)?, table)?))
        }
        SimBooster::AdaboostOlm => {
            let mut ocfg = OlmConfig::new(point.n, LossVariant::Logistic);
            ocfg.seed = booster_seed;
            Booster::Olm(Box::new(OlmBooster::new(space, &ocfg, oracles(space, point.n)?)?))
        }
    };

    let mut out = SeedOutcome::default();
    for t in 1..=cfg.rounds {
        let ex = stream.next_example();
        let y = ex.label;
        let (y_hat, votes) = match &mut booster {
            Booster::Majority => {
                let s = vote_counts(&ex.features, point.k);
                (argmax_label(&s), s)
            }
            Booster::Mbbm(b) => {
                let (y_hat, record) = b.predict(&ex.features)?;
                b.learn(y)?;
                (y_hat, record.votes)
            }
            Booster::Olm(b) => {
                let (y_hat, _) = b.predict(&ex.features)?;
                b.learn(y)?;
                (y_hat, vote_counts(&ex.features, point.k))
            }
        };
        let wrong = y_hat != y;
        if t <= t0 {
            out.noise_mistakes += usize::from(wrong);
        } else {
            out.scored += 1;
            out.mistakes += usize::from(wrong);
            out.vote_losses += usize::from(zero_one_loss(y, &votes));
        }
    }
    Ok(out)
}
