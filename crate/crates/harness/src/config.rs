//! Flat `key = value` configuration files. Repeated keys form lists, `#`
//! starts a comment, and unknown keys are rejected so typos surface early.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mcboost::mbbm::WeightScaling;
use mcboost::olm::LossVariant;
use mcboost::potential::{DEFAULT_STATE_CAP, DEFAULT_WEIGHT_BOUND_CONSTANT};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};

#[derive(Debug, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, Vec<(String, usize)>>,
    used: RefCell<BTreeSet<String>>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| config_err(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(config_err(format!("line {line_no}: empty key")));
            }
            entries.entry(key.to_string()).or_default().push((value.trim().to_string(), line_no));
        }
        Ok(RawConfig { entries, used: RefCell::new(BTreeSet::new()), base_dir: PathBuf::from(".") })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut raw = Self::parse(&text)?;
        raw.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(raw)
    }

    /// Replaces every value of `key`.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), vec![(value.to_string(), 0)]);
    }

    /// Replaces every value of `key` with `values`, in order.
    pub fn set_list(&mut self, key: &str, values: &[String]) {
        self.entries.insert(key.to_string(), values.iter().map(|v| (v.clone(), 0)).collect());
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    fn values(&self, key: &str) -> Vec<(String, usize)> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).cloned().unwrap_or_default()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn one<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let vals = self.values(key);
        match vals.as_slice() {
            [] => Ok(None),
            [(v, line)] => parse_value(key, v, *line).map(Some),
            _ => Err(config_err(format!("key `{key}` may appear only once"))),
        }
    }

    pub fn one_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.one(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.one(key)?.ok_or_else(|| config_err(format!("missing required key `{key}`")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values(key).iter().map(|(v, line)| parse_value(key, v, *line)).collect()
    }

    /// Keys starting with `prefix`, with the prefix stripped.
    pub fn with_prefix(&self, prefix: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (k, vals) in &self.entries {
            if let Some(rest) = k.strip_prefix(prefix) {
                self.used.borrow_mut().insert(k.clone());
                for (v, _) in vals {
                    out.push((rest.to_string(), v.clone()));
                }
            }
        }
        out
    }

    /// Fails on keys nobody asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self.entries.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(config_err(format!("unknown keys: {}", unknown.join(", "))))
        }
    }

    /// SHA-256 over the sorted `key=value` lines.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (k, vals) in &self.entries {
            for (v, _) in vals {
                h.update(k.as_bytes());
                h.update(b"=");
                h.update(v.as_bytes());
                h.update(b"\n");
            }
        }
        hex::encode(h.finalize())
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| {
        if line > 0 {
            config_err(format!("line {line}: bad value `{v}` for `{key}`: {e}"))
        } else {
            config_err(format!("bad value `{v}` for `{key}`: {e}"))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SingleWeak,
    OnlineMbbm,
    AdaboostOlm,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single_weak" => Ok(Algorithm::SingleWeak),
            "online_mbbm" => Ok(Algorithm::OnlineMbbm),
            "adaboost_olm" => Ok(Algorithm::AdaboostOlm),
            _ => Err("expected single_weak, online_mbbm or adaboost_olm".into()),
        }
    }
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SingleWeak => "single_weak",
            Algorithm::OnlineMbbm => "online_mbbm",
            Algorithm::AdaboostOlm => "adaboost_olm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Stump,
    NaiveBayes,
    Oracle,
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stump" => Ok(LearnerKind::Stump),
            "naive_bayes" => Ok(LearnerKind::NaiveBayes),
            "oracle" => Ok(LearnerKind::Oracle),
            _ => Err("expected stump, naive_bayes or oracle".into()),
        }
    }
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Stump => "stump",
            LearnerKind::NaiveBayes => "naive_bayes",
            LearnerKind::Oracle => "oracle",
        }
    }
}

/// Inclusive integer range written `a..b`, or a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo == 0 || lo > hi {
            return Err(format!("range {s} must satisfy 1 <= lo <= hi"));
        }
        Ok(IntRange { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    pub kind: LearnerKind,
    pub refresh_period: IntRange,
    pub max_bins: usize,
    pub variance_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    Numeric,
    OneHot,
    /// Levels in order; level `j` maps to `j`.
    Ordinal(Vec<String>),
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "numeric" => Ok(Encoding::Numeric),
            "onehot" => Ok(Encoding::OneHot),
            _ => match s.strip_prefix("ordinal:") {
                Some(levels) => {
                    let levels: Vec<String> = levels.split(',').map(|l| l.trim().to_string()).collect();
                    if levels.iter().any(String::is_empty) {
                        return Err("empty ordinal level".into());
                    }
                    Ok(Encoding::Ordinal(levels))
                }
                None => Err("expected numeric, onehot or ordinal:<a,b,...>".into()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingRule {
    Reject,
    Zero,
}

impl FromStr for MissingRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "reject" => Ok(MissingRule::Reject),
            "zero" => Ok(MissingRule::Zero),
            _ => Err("expected reject or zero".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub label: String,
    /// Empty means every column except the label.
    pub features: Vec<String>,
    pub encodings: BTreeMap<String, Encoding>,
    pub missing: MissingRule,
    /// Class names in label order; empty means sorted distinct values.
    pub classes: Vec<String>,
}

impl DatasetSpec {
    fn from_raw(raw: &RawConfig) -> Result<Self> {
        let path: PathBuf = raw.required::<String>("dataset.path")?.into();
        let path = if path.is_absolute() { path } else { raw.base_dir().join(path) };
        let name = match raw.one::<String>("dataset.name")? {
            Some(n) => n,
            None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        let mut encodings = BTreeMap::new();
        for (col, v) in raw.with_prefix("dataset.encoding.") {
            let enc = v.parse::<Encoding>().map_err(|e| config_err(format!("dataset.encoding.{col}: {e}")))?;
            encodings.insert(col, enc);
        }
        let classes = match raw.one::<String>("dataset.classes")? {
            Some(c) => c.split(',').map(|s| s.trim().to_string()).collect(),
            None => Vec::new(),
        };
        Ok(DatasetSpec {
            name,
            path,
            label: raw.required("dataset.label")?,
            features: raw.list("dataset.feature")?,
            encodings,
            missing: raw.one_or("dataset.missing", MissingRule::Reject)?,
            classes,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversaryKind {
    ConstantEdge { edge: f64 },
    TwoPhase { gamma: f64, excess: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarySpec {
    pub k: usize,
    pub kind: AdversaryKind,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Dataset(DatasetSpec),
    Adversary(AdversarySpec),
}

impl Source {
    pub fn name(&self) -> String {
        match self {
            Source::Dataset(d) => d.name.clone(),
            Source::Adversary(a) => match a.kind {
                AdversaryKind::ConstantEdge { edge } => format!("adversary_k{}_edge{}", a.k, edge),
                AdversaryKind::TwoPhase { gamma, .. } => format!("adversary_k{}_two_phase{}", a.k, gamma),
            },
        }
    }
}

fn parse_scaling(raw: &RawConfig) -> Result<WeightScaling> {
    let c = raw.one_or("mbbm.bound_c", DEFAULT_WEIGHT_BOUND_CONSTANT)?;
    match raw.one_or("mbbm.scaling", "trivial".to_string())?.as_str() {
        "trivial" => Ok(WeightScaling::Trivial),
        "bound" => Ok(WeightScaling::NormBound { c }),
        "running_max" => Ok(WeightScaling::RunningMax),
        other => Err(config_err(format!("mbbm.scaling: unknown mode `{other}`"))),
    }
}

/// Everything needed to run one `run` or `sweep` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: Source,
    pub algorithms: Vec<Algorithm>,
    pub ns: Vec<usize>,
    pub gammas: Vec<f64>,
    pub losses: Vec<LossVariant>,
    pub learner: LearnerParams,
    pub scaling: WeightScaling,
    pub mc_samples: usize,
    pub state_cap: usize,
    pub seed: u64,
    /// `None` picks a default from the source size.
    pub reorders: Option<usize>,
    pub baseline_m: usize,
    pub audit: bool,
    pub output_dir: Option<PathBuf>,
    pub fingerprint: String,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let source = match raw.one_or("source", "dataset".to_string())?.as_str() {
            "dataset" => Source::Dataset(DatasetSpec::from_raw(raw)?),
            "adversary" => {
                let k = raw.required("adversary.k")?;
                let kind = match raw.one_or("adversary.mode", "constant_edge".to_string())?.as_str() {
                    "constant_edge" => AdversaryKind::ConstantEdge { edge: raw.required("adversary.edge")? },
                    "two_phase" => AdversaryKind::TwoPhase {
                        gamma: raw.required("adversary.gamma")?,
                        excess: raw.required("adversary.excess")?,
                    },
                    other => return Err(config_err(format!("adversary.mode: unknown mode `{other}`"))),
                };
                Source::Adversary(AdversarySpec { k, kind, rounds: raw.required("adversary.rounds")? })
            }
            other => return Err(config_err(format!("source: expected dataset or adversary, got `{other}`"))),
        };
        let algorithms: Vec<Algorithm> = raw.list("algorithm")?;
        if algorithms.is_empty() {
            return Err(config_err("at least one `algorithm` is required"));
        }
        let ns: Vec<usize> = raw.list("n")?;
        if ns.is_empty() || ns.contains(&0) {
            return Err(config_err("`n` (number of weak learners) must be given and positive"));
        }
        let gammas: Vec<f64> = raw.list("gamma")?;
        let wants_mbbm = algorithms.contains(&Algorithm::OnlineMbbm);
        if wants_mbbm && gammas.is_empty() {
            return Err(config_err("online_mbbm needs at least one `gamma`"));
        }
        if !wants_mbbm && !gammas.is_empty() {
            return Err(config_err("`gamma` is only meaningful with online_mbbm"));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g < 0.5)) {
            return Err(config_err(format!("gamma {g} must lie in (0, 0.5)")));
        }
        let mut losses: Vec<LossVariant> = raw
            .list::<String>("loss")?
            .iter()
            .map(|s| s.parse::<LossVariant>().map_err(|e| config_err(e.to_string())))
            .collect::<Result<_>>()?;
        if losses.is_empty() {
            losses.push(LossVariant::Logistic);
        }
        let learner = LearnerParams {
            kind: raw.one_or("learner", LearnerKind::Stump)?,
            refresh_period: raw.one_or("learner.refresh_period", IntRange { lo: 10, hi: 50 })?,
            max_bins: raw.one_or("learner.max_bins", mcboost::weaklearn::DEFAULT_MAX_BINS)?,
            variance_floor: raw.one_or("learner.variance_floor", mcboost::weaklearn::DEFAULT_VARIANCE_FLOOR)?,
        };
        if learner.max_bins < 2 {
            return Err(config_err("learner.max_bins must be at least 2"));
        }
        if matches!(source, Source::Adversary(_)) != (learner.kind == LearnerKind::Oracle) {
            return Err(config_err("oracle learners go with adversary sources and vice versa"));
        }
        let reorders: Option<usize> = raw.one("reorders")?;
        if reorders == Some(0) {
            return Err(config_err("reorders must be at least 1"));
        }
        let cfg = ExperimentConfig {
            name: raw.one_or("name", "experiment".to_string())?,
            source,
            algorithms,
            ns,
            gammas,
            losses,
            learner,
            scaling: parse_scaling(raw)?,
            mc_samples: raw.one_or("mbbm.mc_samples", 2000)?,
            state_cap: raw.one_or("potential.cap", DEFAULT_STATE_CAP)?,
            seed: raw.one_or("seed", 0)?,
            reorders,
            baseline_m: raw.one_or("baseline.m", 20)?,
            audit: raw.one_or("audit", false)?,
            output_dir: raw.one::<String>("output.dir")?.map(PathBuf::from),
            fingerprint: raw.fingerprint(),
        };
        if cfg.baseline_m == 0 {
            return Err(config_err("baseline.m must be at least 1"));
        }
        raw.finish()?;
        Ok(cfg)
    }

    /// 27 reorderings up to 2000 rows, 9 above, 1 for adversary streams.
    pub fn resolved_reorders(&self, rows: usize) -> usize {
        match (self.reorders, &self.source) {
            (Some(r), _) => r,
            (None, Source::Adversary(_)) => 1,
            (None, Source::Dataset(_)) if rows <= 2000 => 27,
            (None, Source::Dataset(_)) => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimBooster {
    Majority,
    OnlineMbbm,
    AdaboostOlm,
}

impl FromStr for SimBooster {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "majority" => Ok(SimBooster::Majority),
            "online_mbbm" => Ok(SimBooster::OnlineMbbm),
            "adaboost_olm" => Ok(SimBooster::AdaboostOlm),
            _ => Err("expected majority, online_mbbm or adaboost_olm".into()),
        }
    }
}

impl SimBooster {
    pub fn name(self) -> &'static str {
        match self {
            SimBooster::Majority => "majority",
            SimBooster::OnlineMbbm => "online_mbbm",
            SimBooster::AdaboostOlm => "adaboost_olm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    ConstantEdge,
    TwoPhase,
}

impl FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constant_edge" => Ok(SimMode::ConstantEdge),
            "two_phase" => Ok(SimMode::TwoPhase),
            _ => Err("expected constant_edge or two_phase".into()),
        }
    }
}

/// A grid of lower-bound simulations: every `(k, γ, N)` combination is run
/// with planted edge `2γ` over `seeds` independent streams.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub name: String,
    pub ks: Vec<usize>,
    pub gammas: Vec<f64>,
    pub ns: Vec<usize>,
    pub rounds: usize,
    pub seeds: usize,
    pub mode: SimMode,
    /// Excess loss `S`; `None` uses `k·ln(1/δ)/γ`.
    pub excess: Option<f64>,
    pub delta: f64,
    pub booster: SimBooster,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub fingerprint: String,
}

impl SimulateConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let cfg = SimulateConfig {
            name: raw.one_or("name", "simulate".to_string())?,
            ks: raw.list("k")?,
            gammas: raw.list("gamma")?,
            ns: raw.list("n")?,
            rounds: raw.required("rounds")?,
            seeds: raw.one_or("seeds", 1)?,
            mode: raw.one_or("mode", SimMode::ConstantEdge)?,
            excess: raw.one("excess")?,
            delta: raw.one_or("delta", 0.01)?,
            booster: raw.one_or("booster", SimBooster::Majority)?,
            seed: raw.one_or("seed", 0)?,
            output_dir: raw.one::<String>("output.dir")?.map(PathBuf::from),
            fingerprint: raw.fingerprint(),
        };
        raw.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.gammas.is_empty() || self.ns.is_empty() {
            return Err(config_err("simulate needs at least one each of `k`, `gamma` and `n`"));
        }
        if self.ks.iter().any(|&k| k < 2) || self.ns.contains(&0) {
            return Err(config_err("k must be at least 2 and n at least 1"));
        }
        if self.rounds == 0 || self.seeds == 0 {
            return Err(config_err("rounds and seeds must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta must lie in (0, 1)"));
        }
        for &g in &self.gammas {
            if !(g > 0.0 && g < 0.25) {
                return Err(config_err(format!("gamma {g} must lie in (0, 0.25)")));
            }
            for &k in &self.ks {
                let floor = self.min_excess(k, g);
                if let Some(s) = self.excess {
                    if s < floor {
                        return Err(config_err(format!(
                            "excess {s} is below k·ln(1/δ)/γ = {floor:.4} for k = {k}, gamma = {g}"
                        )));
                    }
                }
                let t0 = mcboost::weaklearn::two_phase_boundary(k, g, self.excess_for(k, g));
                if self.mode == SimMode::TwoPhase && self.rounds < t0 {
                    return Err(config_err(format!(
                        "rounds {} do not cover the noise phase of {t0} rounds for k = {k}, gamma = {g}",
                        self.rounds
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn min_excess(&self, k: usize, gamma: f64) -> f64 {
        k as f64 * (1.0 / self.delta).ln() / gamma
    }

    pub fn excess_for(&self, k: usize, gamma: f64) -> f64 {
        self.excess.unwrap_or_else(|| self.min_excess(k, gamma))
    }
}
