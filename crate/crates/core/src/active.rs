//! Pool-based active learning.
//!
//! The cycle: draw random examples from the unlabeled pool `U` until both
//! labels have been seen (that draw set is `T0`), then repeatedly train on
//! `T(i-1)`, select a batch of `N` unlabeled examples by a selection
//! strategy, label them, and set `T(i) = T(i-1) + B(i)`, `U(i) = U - T(i)`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{confusion, rates, EvalError, EvalReport};
use crate::fingerprint::{self, Fingerprint};
use crate::svm::{self, LabeledExample, ModelError, SvmModel, TrainConfig, TrainError};
use crate::vectorizer::FeatureVector;
use crate::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CycleError {
    #[error("unlabeled pool is empty")]
    EmptyPool,
    #[error("initial training set requires an empty labeled set")]
    AlreadyInitialized,
    #[error("only one class seen after {drawn} draws")]
    SingleClassPool { drawn: usize },
    #[error("duplicate pool id {0:?}")]
    DuplicateId(String),
    #[error("id {0:?} is not in the unlabeled pool")]
    NotUnlabeled(String),
    #[error("label source has no label for {0:?}")]
    Unlabelable(String),
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("training failed: {source}")]
    Train {
        source: TrainError,
        /// Iterations completed before the failure.
        history: Box<CycleHistory>,
    },
}

/// Unlabeled pool `U(i)` and labeled set `T(i)`, keyed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    unlabeled: BTreeMap<String, FeatureVector>,
    labeled: BTreeMap<String, LabeledExample>,
}

impl Pool {
    pub fn new<I>(items: I) -> Result<Pool, CycleError>
    where
        I: IntoIterator<Item = (String, FeatureVector)>,
    {
        let mut unlabeled = BTreeMap::new();
        for (id, x) in items {
            if unlabeled.contains_key(&id) {
                return Err(CycleError::DuplicateId(id));
            }
            unlabeled.insert(id, x);
        }
        Ok(Pool {
            unlabeled,
            labeled: BTreeMap::new(),
        })
    }

    pub fn unlabeled(&self) -> &BTreeMap<String, FeatureVector> {
        &self.unlabeled
    }

    pub fn labeled(&self) -> &BTreeMap<String, LabeledExample> {
        &self.labeled
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.len()
    }

    /// Moves `id` from the unlabeled pool to the labeled set.
    pub fn label(&mut self, id: &str, y: Label) -> Result<(), CycleError> {
        let (id, x) = self
            .unlabeled
            .remove_entry(id)
            .ok_or_else(|| CycleError::NotUnlabeled(id.into()))?;
        self.labeled.insert(id.clone(), LabeledExample { id, x, y });
        Ok(())
    }

    /// Training set `T` in id order.
    pub fn training_set(&self) -> Vec<LabeledExample> {
        self.labeled.values().cloned().collect()
    }

    pub fn count(&self, y: Label) -> usize {
        self.labeled.values().filter(|e| e.y == y).count()
    }

    /// All ids, labeled or not.
    pub fn ids(&self) -> BTreeSet<&str> {
        self.unlabeled
            .keys()
            .chain(self.labeled.keys())
            .map(String::as_str)
            .collect()
    }

    /// `U(i)` and `T(i)` are disjoint and together equal `universe`.
    pub fn is_partition_of(&self, universe: &BTreeSet<String>) -> bool {
        let disjoint = self.unlabeled.keys().all(|k| !self.labeled.contains_key(k));
        let union: BTreeSet<&str> = self.ids();
        disjoint
            && union.len() == universe.len()
            && universe.iter().all(|k| union.contains(k.as_str()))
    }
}

/// Supplies labels for pool ids: an oracle in simulation, a person in live use.
pub trait LabelSource {
    fn label(&mut self, id: &str) -> Option<Label>;
}

impl LabelSource for BTreeMap<String, Label> {
    fn label(&mut self, id: &str) -> Option<Label> {
        self.get(id).copied()
    }
}

impl<F: FnMut(&str) -> Option<Label>> LabelSource for F {
    fn label(&mut self, id: &str) -> Option<Label> {
        self(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    /// Smallest |f(x)| first.
    Closest,
    /// Largest |f(x)| first.
    Furthest,
    /// Uniform without replacement.
    Random,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [Self::Closest, Self::Furthest, Self::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Closest => "closest",
            Self::Furthest => "furthest",
            Self::Random => "random",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "closest" => Ok(Self::Closest),
            "furthest" => Ok(Self::Furthest),
            "random" => Ok(Self::Random),
            other => Err(alloc::format!(
                "unknown strategy {other:?}; expected closest, furthest or random"
            )),
        }
    }
}

/// Selected ids, in selection order, with the decision value of each.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Step 1: draws from `U` until both labels are present. Every drawn example
/// moves to `T0`, including surplus examples of the first-seen class.
pub fn init_training_set<S: LabelSource + ?Sized>(
    mut pool: Pool,
    source: &mut S,
    seed: u64,
    max_draws: usize,
) -> Result<Pool, CycleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_initial(&mut pool, source, &mut rng, max_draws)?;
    Ok(pool)
}

fn draw_initial<S: LabelSource + ?Sized>(
    pool: &mut Pool,
    source: &mut S,
    rng: &mut ChaCha8Rng,
    max_draws: usize,
) -> Result<Vec<String>, CycleError> {
    if !pool.labeled.is_empty() {
        return Err(CycleError::AlreadyInitialized);
    }
    if pool.unlabeled.is_empty() {
        return Err(CycleError::EmptyPool);
    }
    let mut order: Vec<String> = pool.unlabeled.keys().cloned().collect();
    order.shuffle(rng);
    let mut seen = BTreeSet::new();
    let mut drawn = Vec::new();
    for id in order.into_iter().take(max_draws) {
        let y = source.label(&id).ok_or_else(|| CycleError::Unlabelable(id.clone()))?;
        pool.label(&id, y)?;
        seen.insert(y);
        drawn.push(id);
        if seen.len() == 2 {
            return Ok(drawn);
        }
    }
    Err(CycleError::SingleClassPool { drawn: drawn.len() })
}

/// Chooses up to `n` unlabeled ids without touching the pool. Ties in |f|
/// are broken by ascending id; ids are unique, so the order is total.
pub fn select_batch(
    model: &SvmModel,
    pool: &Pool,
    n: usize,
    strategy: SelectionStrategy,
    seed: u64,
) -> Result<Batch, CycleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    select_with_rng(model, pool, n, strategy, &mut rng)
}

fn select_with_rng(
    model: &SvmModel,
    pool: &Pool,
    n: usize,
    strategy: SelectionStrategy,
    rng: &mut ChaCha8Rng,
) -> Result<Batch, CycleError> {
    if n == 0 {
        return Err(CycleError::InvalidBatchSize);
    }
    let mut scored: Vec<(&str, f64)> = pool
        .unlabeled
        .iter()
        .map(|(id, x)| Ok((id.as_str(), model.decision_value(x)?)))
        .collect::<Result<_, ModelError>>()?;
    // BTreeMap iteration is already ascending by id, and the sorts are stable
    match strategy {
        SelectionStrategy::Closest => scored.sort_by(|a, b| a.1.abs().total_cmp(&b.1.abs())),
        SelectionStrategy::Furthest => scored.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs())),
        SelectionStrategy::Random => scored.shuffle(rng),
    }
    scored.truncate(n);
    Ok(Batch {
        ids: scored.iter().map(|&(id, _)| id.into()).collect(),
        scores: scored.iter().map(|&(_, f)| f).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop once at least this many labels have been used.
    pub budget: Option<usize>,
    /// Stop once held-out accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            budget: Some(50),
            target_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveLearningConfig {
    pub batch_size: usize,
    pub strategy: SelectionStrategy,
    pub seed: u64,
    pub stop: StopRule,
    /// Cap on initial random draws; `None` allows the whole pool.
    pub max_init_draws: Option<usize>,
}

impl Default for ActiveLearningConfig {
    fn default() -> Self {
        ActiveLearningConfig {
            batch_size: 5,
            strategy: SelectionStrategy::Closest,
            seed: 0,
            stop: StopRule::default(),
            max_init_draws: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|T(i)|`.
    pub labels_used: usize,
    /// `B(i)`; empty for iteration 0, whose examples are `initial_ids`.
    pub batch: Batch,
    pub model_fingerprint: Fingerprint,
    pub n_support: usize,
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleHistory {
    pub strategy: SelectionStrategy,
    pub seed: u64,
    /// `T0` in draw order.
    pub initial_ids: Vec<String>,
    pub records: Vec<IterationRecord>,
}

impl CycleHistory {
    /// First `labels_used` whose held-out accuracy is at least `target`.
    pub fn labels_to_accuracy(&self, target: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.report.as_ref().is_some_and(|e| e.accuracy().is_some_and(|a| a >= target)))
            .map(|r| r.labels_used)
    }
}

pub fn model_fingerprint(model: &SvmModel) -> Fingerprint {
    fingerprint::of_bytes(&svm::serialize_model(model))
}

/// Runs Step 1, then Steps 2-4 until the stop rule fires or the pool is empty.
pub fn run_cycle<S: LabelSource + ?Sized>(
    pool: Pool,
    source: &mut S,
    train_config: &TrainConfig,
    config: &ActiveLearningConfig,
    test: Option<&[LabeledExample]>,
) -> Result<CycleHistory, CycleError> {
    run_cycle_with_pool(pool, source, train_config, config, test).map(|(h, _)| h)
}

/// As [`run_cycle`], also returning the final pool.
pub fn run_cycle_with_pool<S: LabelSource + ?Sized>(
    mut pool: Pool,
    source: &mut S,
    train_config: &TrainConfig,
    config: &ActiveLearningConfig,
    test: Option<&[LabeledExample]>,
) -> Result<(CycleHistory, Pool), CycleError> {
    if config.batch_size == 0 {
        return Err(CycleError::InvalidBatchSize);
    }
    let dim = pool
        .unlabeled
        .values()
        .filter_map(FeatureVector::max_index)
        .max()
        .map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let max_draws = config.max_init_draws.unwrap_or(usize::MAX);
    let initial_ids = draw_initial(&mut pool, source, &mut rng, max_draws)?;
    let mut history = CycleHistory {
        strategy: config.strategy,
        seed: config.seed,
        initial_ids,
        records: Vec::new(),
    };

    let mut batch = Batch::default();
    loop {
        let training = pool.training_set();
        let model = match svm::train_with_dim(&training, dim, train_config) {
            Ok((m, _)) => m,
            Err(source) => {
                return Err(CycleError::Train {
                    source,
                    history: Box::new(history),
                })
            }
        };
        let report = match test {
            Some(t) => Some(rates(&confusion(&model, t)?)?),
            None => None,
        };
        let reached_target = match (config.stop.target_accuracy, &report) {
            (Some(target), Some(r)) => r.accuracy().is_some_and(|a| a >= target),
            _ => false,
        };
        history.records.push(IterationRecord {
            iteration: history.records.len(),
            labels_used: pool.n_labeled(),
            batch: core::mem::take(&mut batch),
            model_fingerprint: model_fingerprint(&model),
            n_support: model.support_ids().len(),
            report,
        });

        let over_budget = config.stop.budget.is_some_and(|b| pool.n_labeled() >= b);
        if reached_target || over_budget || pool.unlabeled.is_empty() {
            break;
        }
        batch = select_with_rng(&model, &pool, config.batch_size, config.strategy, &mut rng)?;
        for id in &batch.ids {
            let y = source.label(id).ok_or_else(|| CycleError::Unlabelable(id.clone()))?;
            pool.label(id, y)?;
        }
    }
    Ok((history, pool))
}
