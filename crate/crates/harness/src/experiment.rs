//! Prequential (predict, then learn) evaluation of boosters and single weak
//! learners over seeded reorderings of a stream.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use mcboost::mbbm::{MbbmBooster, MbbmConfig};
use mcboost::olm::{LossVariant, OlmBooster, OlmConfig};
use mcboost::potential::{derive_seed, PotentialMode, PotentialTable};
use mcboost::weaklearn::{AdversaryMode, AdversaryStream};
use mcboost::{Example, Label, LabelSpace};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AdversaryKind, AdversarySpec, Algorithm, ExperimentConfig, Source};
use crate::dataset::{self, Dataset};
use crate::error::{HarnessError, Result};
use crate::learners::{build_pool, BoxedLearner};

/// Stream id used when deriving seeds, so ordering, learner and booster
/// randomness never share a generator.
const ORDER_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;
const BOOSTER_STREAM: u64 = 3;

/// One algorithm configuration within an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variant {
    pub algorithm: Algorithm,
    /// Booster size, or the pool size `M` for `single_weak`.
    pub n: usize,
    pub gamma: Option<f64>,
    pub loss: Option<LossVariant>,
}

impl Variant {
    pub fn label(&self) -> String {
        let mut s = format!("{} n={}", self.algorithm.name(), self.n);
        if let Some(g) = self.gamma {
            let _ = write!(s, " gamma={g}");
        }
        if let Some(l) = self.loss {
            let _ = write!(s, " loss={l}");
        }
        s
    }

    pub fn file_stem(&self) -> String {
        self.label().replace([' ', '='], "_")
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

pub fn variants(cfg: &ExperimentConfig) -> Vec<Variant> {
    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    let mut out = Vec::new();
    for alg in algorithms {
        match alg {
            Algorithm::SingleWeak => out.push(Variant { algorithm: alg, n: cfg.baseline_m, gamma: None, loss: None }),
            Algorithm::OnlineMbbm => {
                for &n in &cfg.ns {
                    for &g in &cfg.gammas {
                        out.push(Variant { algorithm: alg, n, gamma: Some(g), loss: None });
                    }
                }
            }
            Algorithm::AdaboostOlm => {
                for &n in &cfg.ns {
                    for &l in &cfg.losses {
                        out.push(Variant { algorithm: alg, n, gamma: None, loss: Some(l) });
                    }
                }
            }
        }
    }
    out
}

/// Running accuracy counts for one pass over a stream of known length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub rounds: usize,
    pub window: usize,
    pub seen: usize,
    pub correct: usize,
    pub final_correct: usize,
}

impl Tally {
    /// The final window is the last `⌈T/5⌉` rounds.
    pub fn new(rounds: usize) -> Self {
        Tally { rounds, window: rounds.div_ceil(5), ..Tally::default() }
    }

    pub fn record(&mut self, correct: bool) {
        let in_window = self.seen >= self.rounds - self.window;
        self.seen += 1;
        if correct {
            self.correct += 1;
            if in_window {
                self.final_correct += 1;
            }
        }
    }

    pub fn total_accuracy(&self) -> f64 {
        ratio(self.correct, self.rounds)
    }

    pub fn final_accuracy(&self) -> f64 {
        ratio(self.final_correct, self.window)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Something that can be evaluated prequentially.
pub trait Online {
    fn predict(&mut self, x: &[f64]) -> mcboost::Result<Label>;
    fn learn(&mut self, x: &[f64], y: Label) -> mcboost::Result<()>;
}

/// Runs `model` over `examples`, predicting each label before revealing it.
/// On failure returns the tally so far and the number of completed rounds.
pub fn prequential<M: Online + ?Sized>(
    model: &mut M,
    examples: &[Example],
) -> (Tally, Option<(usize, mcboost::Error)>) {
    let mut tally = Tally::new(examples.len());
    for (t, ex) in examples.iter().enumerate() {
        let y_hat = match model.predict(&ex.features) {
            Ok(l) => l,
            Err(e) => return (tally, Some((t, e))),
        };
        tally.record(y_hat == ex.label);
        if let Err(e) = model.learn(&ex.features, ex.label) {
            return (tally, Some((t, e)));
        }
    }
    (tally, None)
}

struct AuditLog(Option<String>);

impl AuditLog {
    fn push<T: Serialize>(&mut self, record: &T) {
        if let Some(buf) = &mut self.0 {
            buf.push_str(&serde_json::to_string(record).expect("audit records serialize"));
            buf.push('\n');
        }
    }
}

struct MbbmModel {
    booster: MbbmBooster<BoxedLearner>,
    audit: AuditLog,
}

impl Online for MbbmModel {
    fn predict(&mut self, x: &[f64]) -> mcboost::Result<Label> {
        Ok(self.booster.predict(x)?.0)
    }

    fn learn(&mut self, _x: &[f64], y: Label) -> mcboost::Result<()> {
        let record = self.booster.learn(y)?;
        self.audit.push(&record);
        Ok(())
    }
}

struct OlmModel {
    booster: OlmBooster<BoxedLearner>,
    audit: AuditLog,
}

impl Online for OlmModel {
    fn predict(&mut self, x: &[f64]) -> mcboost::Result<Label> {
        Ok(self.booster.predict(x)?.0)
    }

    fn learn(&mut self, _x: &[f64], y: Label) -> mcboost::Result<()> {
        let record = self.booster.learn(y)?;
        self.audit.push(&record);
        Ok(())
    }
}

/// The data a run draws from: a loaded dataset, reshuffled per reordering,
/// or an adversary regenerated per reordering.
pub enum Prepared {
    Dataset(Dataset),
    Adversary { spec: AdversarySpec, space: LabelSpace, coords: usize },
}

impl Prepared {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.source {
            Source::Dataset(spec) => Ok(Prepared::Dataset(dataset::load_csv(spec)?)),
            Source::Adversary(spec) => {
                let space = LabelSpace::new(spec.k).map_err(|e| HarnessError::Config(e.to_string()))?;
                let mut coords = cfg.ns.iter().copied().max().unwrap_or(1);
                if cfg.algorithms.contains(&Algorithm::SingleWeak) {
                    coords = coords.max(cfg.baseline_m);
                }
                Ok(Prepared::Adversary { spec: spec.clone(), space, coords })
            }
        }
    }

    pub fn space(&self) -> LabelSpace {
        match self {
            Prepared::Dataset(d) => d.space,
            Prepared::Adversary { space, .. } => *space,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prepared::Dataset(d) => d.dim(),
            Prepared::Adversary { coords, .. } => *coords,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Prepared::Dataset(d) => d.len(),
            Prepared::Adversary { spec, .. } => spec.rounds,
        }
    }

    /// The stream for reordering `r`.
    pub fn examples(&self, seed: u64) -> Result<Vec<Example>> {
        match self {
            Prepared::Dataset(d) => {
                let mut out = d.examples.clone();
                out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                Ok(out)
            }
            Prepared::Adversary { spec, space, coords } => {
                let stream = match spec.kind {
                    AdversaryKind::ConstantEdge { edge } => {
                        AdversaryStream::new(*space, *coords, AdversaryMode::ConstantEdge { edge }, seed)?
                    }
                    AdversaryKind::TwoPhase { gamma, excess } => {
                        AdversaryStream::two_phase(*space, *coords, gamma, excess, seed)?
                    }
                };
                Ok(stream.take(spec.rounds).collect())
            }
        }
    }
}

/// Outcome of one (variant, reordering) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub variant: usize,
    pub reorder: usize,
    pub total_accuracy: f64,
    pub final_accuracy: f64,
    pub seconds: f64,
    /// Mean of the experts' empirical edges at the end of an OLM run.
    pub mean_edge: Option<f64>,
    pub mode: Option<PotentialMode>,
    /// `(completed rounds, reason)` when the run stopped early.
    pub aborted: Option<(usize, String)>,
    pub audit: Option<String>,
}

/// Mean over reorderings for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: Variant,
    pub reorders: usize,
    pub total_accuracy: f64,
    pub final_accuracy: f64,
    pub seconds: f64,
    pub mean_edge: Option<f64>,
    pub mode: Option<PotentialMode>,
    pub partial: bool,
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub source_name: String,
    pub k: usize,
    pub rows: usize,
    pub variants: Vec<Variant>,
    pub results: Vec<RunResult>,
    pub cells: Vec<CellResult>,
}

impl Experiment {
    pub fn is_partial(&self) -> bool {
        self.results.iter().any(|r| r.partial)
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    prepared: &'a Prepared,
    tables: BTreeMap<u64, Arc<PotentialTable>>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let prepared = Prepared::load(cfg)?;
    run_prepared(cfg, &prepared)
}

pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<Experiment> {
    let space = prepared.space();
    let variants = variants(cfg);
    let mut tables = BTreeMap::new();
    for &g in &cfg.gammas {
        let table = PotentialTable::with_cap(space.k(), g, cfg.state_cap)?;
        tables.insert(g.to_bits(), Arc::new(table));
    }
    let reorders = cfg.resolved_reorders(prepared.rows());
    let ctx = Context { cfg, prepared, tables };
    let jobs: Vec<(usize, usize)> = (0..reorders).flat_map(|r| (0..variants.len()).map(move |v| (v, r))).collect();
    let cells: Vec<CellResult> =
        jobs.par_iter().map(|&(v, r)| run_cell(&ctx, v, &variants[v], r)).collect::<Result<_>>()?;

    let results = variants
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let mine: Vec<&CellResult> = cells.iter().filter(|c| c.variant == vi).collect();
            let n = mine.len() as f64;
            let mean = |f: &dyn Fn(&CellResult) -> f64| mine.iter().map(|c| f(c)).sum::<f64>() / n;
            let edges: Vec<f64> = mine.iter().filter_map(|c| c.mean_edge).collect();
            RunResult {
                variant: *v,
                reorders: mine.len(),
                total_accuracy: mean(&|c| c.total_accuracy),
                final_accuracy: mean(&|c| c.final_accuracy),
                seconds: mean(&|c| c.seconds),
                mean_edge: (!edges.is_empty()).then(|| edges.iter().sum::<f64>() / edges.len() as f64),
                mode: mine.iter().find_map(|c| c.mode),
                partial: mine.iter().any(|c| c.aborted.is_some()),
            }
        })
        .collect();

    let source_name = cfg.source.name();
    Ok(Experiment { config: cfg.clone(), source_name, k: space.k(), rows: prepared.rows(), variants, results, cells })
}

fn run_cell(ctx: &Context<'_>, vi: usize, v: &Variant, r: usize) -> Result<CellResult> {
    let cfg = ctx.cfg;
    let space = ctx.prepared.space();
    let dim = ctx.prepared.dim();
    let examples = ctx.prepared.examples(derive_seed(cfg.seed, (ORDER_STREAM, r as u64, 0)))?;
    // learners share a seed within a reordering so boosters are compared
    // on identical pools
    let learner_seed = derive_seed(cfg.seed, (LEARNER_STREAM, r as u64, 0));
    let booster_seed = derive_seed(cfg.seed, (BOOSTER_STREAM, r as u64, vi as u64));
    let (pool, _) = build_pool(&cfg.learner, space, dim, v.n, learner_seed)?;
    let audit = AuditLog(cfg.audit.then(String::new));

    let start = Instant::now();
    let mut result = CellResult {
        variant: vi,
        reorder: r,
        total_accuracy: 0.0,
        final_accuracy: 0.0,
        seconds: 0.0,
        mean_edge: None,
        mode: None,
        aborted: None,
        audit: None,
    };
    match v.algorithm {
        Algorithm::SingleWeak => {
            let (total, fin, aborted, log) = run_single_pool(pool, &examples, audit);
            result.total_accuracy = total;
            result.final_accuracy = fin;
            result.aborted = aborted;
            result.audit = log;
        }
        Algorithm::OnlineMbbm => {
            let gamma = v.gamma.expect("mbbm variants carry gamma");
            let mcfg =
                MbbmConfig { n: v.n, gamma, scaling: cfg.scaling, mc_samples: cfg.mc_samples, seed: booster_seed };
            let table = ctx.tables[&gamma.to_bits()].clone();
            let booster = MbbmBooster::with_table(space, &mcfg, pool, table)?;
            result.mode = Some(booster.mode());
            let mut model = MbbmModel { booster, audit };
            let (tally, aborted) = prequential(&mut model, &examples);
            fill(&mut result, tally, aborted);
            result.audit = model.audit.0;
        }
        Algorithm::AdaboostOlm => {
            let ocfg = OlmConfig { n: v.n, loss: v.loss.expect("olm variants carry a loss"), seed: booster_seed };
            let booster = OlmBooster::new(space, &ocfg, pool)?;
            let mut model = OlmModel { booster, audit };
            let (tally, aborted) = prequential(&mut model, &examples);
            fill(&mut result, tally, aborted);
            let edges: Vec<f64> = model.booster.empirical_edges().into_iter().flatten().collect();
            if !edges.is_empty() {
                result.mean_edge = Some(edges.iter().sum::<f64>() / edges.len() as f64);
            }
            result.audit = model.audit.0;
        }
    }
    result.seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

fn fill(result: &mut CellResult, tally: Tally, aborted: Option<(usize, mcboost::Error)>) {
    result.total_accuracy = tally.total_accuracy();
    result.final_accuracy = tally.final_accuracy();
    result.aborted = aborted.map(|(t, e)| (t, e.to_string()));
}

#[derive(Serialize)]
struct PoolRecord<'a> {
    t: usize,
    y: Label,
    predictions: &'a [Label],
}

/// Every learner sees every example at unit weight; the best learner in
/// hindsight is taken separately for each metric.
fn run_single_pool(
    mut pool: Vec<BoxedLearner>,
    examples: &[Example],
    mut audit: AuditLog,
) -> (f64, f64, Option<(usize, String)>, Option<String>) {
    let mut tallies = vec![Tally::new(examples.len()); pool.len()];
    let mut predictions = Vec::with_capacity(pool.len());
    let mut aborted = None;
    'rounds: for (t, ex) in examples.iter().enumerate() {
        predictions.clear();
        for (i, learner) in pool.iter().enumerate() {
            match learner.predict(&ex.features) {
                Ok(l) => {
                    tallies[i].record(l == ex.label);
                    predictions.push(l);
                }
                Err(e) => {
                    aborted = Some((t, format!("weak learner {}: {e}", i + 1)));
                    break 'rounds;
                }
            }
        }
        for (i, learner) in pool.iter_mut().enumerate() {
            if let Err(e) = learner.learn(&ex.features, ex.label, 1.0) {
                aborted = Some((t, format!("weak learner {}: {e}", i + 1)));
                break 'rounds;
            }
        }
        audit.push(&PoolRecord { t: t + 1, y: ex.label, predictions: &predictions });
    }
    let total = tallies.iter().map(Tally::total_accuracy).fold(0.0, f64::max);
    let fin = tallies.iter().map(Tally::final_accuracy).fold(0.0, f64::max);
    (total, fin, aborted, audit.0)
}
