//! Error, miss and false-alarm rates, and strategy-comparison experiments.
//!
//! Naming follows the source definitions exactly:
//!
//! * miss rate = misclassified nonspam / total nonspam
//! * false alarm rate = misclassified spam / total spam
//!
//! Note that this is the reverse of common detection-theory usage, where a
//! "miss" would be spam let through.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::active::{run_cycle, ActiveLearningConfig, CycleError, CycleHistory, Pool, SelectionStrategy};
use crate::corpus::Corpus;
use crate::svm::{LabeledExample, ModelError, SvmModel, TrainConfig};
use crate::vectorizer::{build_dictionary, vectorize, VectorizeError, VectorizerConfig};
use crate::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("empty test set")]
    EmptyTestSet,
    #[error("inconsistent confusion counts: {0}")]
    InconsistentCounts(&'static str),
    #[error("message {0:?} has no true label")]
    UnlabeledCorpus(String),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error("active-learning run failed: {0}")]
    Cycle(Box<CycleError>),
}

impl From<CycleError> for EvalError {
    fn from(e: CycleError) -> Self {
        EvalError::Cycle(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub n_nonspam_total: u64,
    pub n_spam_total: u64,
    pub nonspam_misclassified: u64,
    pub spam_misclassified: u64,
}

impl ConfusionCounts {
    pub fn new(n_nonspam_total: u64, n_spam_total: u64, nonspam_misclassified: u64, spam_misclassified: u64) -> Self {
        ConfusionCounts {
            n_nonspam_total,
            n_spam_total,
            nonspam_misclassified,
            spam_misclassified,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_nonspam_total + self.n_spam_total
    }

    pub fn misclassified(&self) -> u64 {
        self.nonspam_misclassified + self.spam_misclassified
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match truth {
            Label::Nonspam => {
                self.n_nonspam_total += 1;
                self.nonspam_misclassified += (predicted != truth) as u64;
            }
            Label::Spam => {
                self.n_spam_total += 1;
                self.spam_misclassified += (predicted != truth) as u64;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Absent only when both totals are zero.
    pub error_rate: Option<f64>,
    /// Absent when there are no nonspam examples.
    pub miss_rate: Option<f64>,
    /// Absent when there are no spam examples.
    pub false_alarm_rate: Option<f64>,
    pub counts: ConfusionCounts,
}

impl EvalReport {
    pub fn accuracy(&self) -> Option<f64> {
        self.error_rate.map(|e| 1.0 - e)
    }
}

/// Classifies every test example and tallies errors per true class.
pub fn confusion(model: &SvmModel, test: &[LabeledExample]) -> Result<ConfusionCounts, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut c = ConfusionCounts::default();
    for e in test {
        c.record(e.y, model.classify(&e.x)?);
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn rates(counts: &ConfusionCounts) -> Result<EvalReport, EvalError> {
    if counts.nonspam_misclassified > counts.n_nonspam_total {
        return Err(EvalError::InconsistentCounts("nonspam misclassified exceeds nonspam total"));
    }
    if counts.spam_misclassified > counts.n_spam_total {
        return Err(EvalError::InconsistentCounts("spam misclassified exceeds spam total"));
    }
    Ok(EvalReport {
        error_rate: ratio(counts.misclassified(), counts.total()),
        miss_rate: ratio(counts.nonspam_misclassified, counts.n_nonspam_total),
        false_alarm_rate: ratio(counts.spam_misclassified, counts.n_spam_total),
        counts: *counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: SelectionStrategy,
    pub seed: u64,
    pub points: Vec<(usize, EvalReport)>,
}

impl LearningCurve {
    pub fn from_history(h: &CycleHistory) -> LearningCurve {
        LearningCurve {
            strategy: h.strategy,
            seed: h.seed,
            points: h
                .records
                .iter()
                .filter_map(|r| r.report.map(|rep| (r.labels_used, rep)))
                .collect(),
        }
    }

    pub fn labels_to_accuracy(&self, target: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|(_, r)| r.accuracy().is_some_and(|a| a >= target))
            .map(|&(n, _)| n)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.points.last().and_then(|(_, r)| r.accuracy())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train_fraction: f64,
    pub target_accuracy: f64,
    pub vectorizer: VectorizerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_fraction: 0.7,
            target_accuracy: 0.9,
            vectorizer: VectorizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: SelectionStrategy,
    pub runs: usize,
    /// Runs that reached the target accuracy.
    pub reached: usize,
    /// Median labels-to-target with unreached runs counted as infinite;
    /// absent when the median itself is unreached.
    pub median_labels_to_target: Option<f64>,
    pub mean_final_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target_accuracy: f64,
    pub seeds: Vec<u64>,
    pub histories: BTreeMap<SelectionStrategy, Vec<CycleHistory>>,
    pub summary: Vec<StrategySummary>,
}

impl Comparison {
    pub fn curves(&self, strategy: SelectionStrategy) -> Vec<LearningCurve> {
        self.histories
            .get(&strategy)
            .map(|hs| hs.iter().map(LearningCurve::from_history).collect())
            .unwrap_or_default()
    }

    pub fn summary_for(&self, strategy: SelectionStrategy) -> Option<&StrategySummary> {
        self.summary.iter().find(|s| s.strategy == strategy)
    }
}

/// Median with `None` ordered after every value.
pub fn median_with_unreached(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<Option<usize>> = values.to_vec();
    v.sort_by_key(|x| (x.is_none(), *x));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].map(|x| x as f64)
    } else {
        match (v[n / 2 - 1], v[n / 2]) {
            (Some(a), Some(b)) => Some((a + b) as f64 / 2.0),
            _ => None,
        }
    }
}

/// One train/test split and vectorized data set per seed.
pub struct SplitData {
    pub pool: Pool,
    pub test: Vec<LabeledExample>,
    pub oracle: BTreeMap<String, Label>,
}

/// Stratified split with `seed`; the dictionary is built from the training
/// side's text only.
pub fn prepare_split(corpus: &Corpus, config: &ExperimentConfig, seed: u64) -> Result<SplitData, EvalError> {
    if let Some(m) = corpus.messages().iter().find(|m| m.true_label.is_none()) {
        return Err(EvalError::UnlabeledCorpus(m.id.clone()));
    }
    let (train, test) = corpus.stratified_split(config.train_fraction, seed);
    let dict = build_dictionary(&train, &config.vectorizer)?;
    let mut items = Vec::with_capacity(train.len());
    let mut oracle = BTreeMap::new();
    for m in train.messages() {
        items.push((m.id.clone(), vectorize(m, &dict, &config.vectorizer)?));
        oracle.insert(m.id.clone(), m.true_label.expect("checked above"));
    }
    let test = test
        .messages()
        .iter()
        .map(|m| {
            Ok(LabeledExample::new(
                m.id.clone(),
                vectorize(m, &dict, &config.vectorizer)?,
                m.true_label.expect("checked above"),
            ))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let pool = Pool::new(items)?;
    Ok(SplitData {
        pool,
        test,
        oracle,
    })
}

/// Runs every strategy on `n_seeds` seeds (`al_config.seed`, `+1`, ...). For a
/// given seed all strategies share the split and the initial training set.
pub fn compare_strategies(
    corpus: &Corpus,
    strategies: &[SelectionStrategy],
    al_config: &ActiveLearningConfig,
    train_config: &TrainConfig,
    experiment: &ExperimentConfig,
    n_seeds: usize,
) -> Result<Comparison, EvalError> {
    if n_seeds == 0 {
        return Err(EvalError::NoSeeds);
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|k| al_config.seed.wrapping_add(k)).collect();
    let mut histories: BTreeMap<SelectionStrategy, Vec<CycleHistory>> = BTreeMap::new();
    for &seed in &seeds {
        let split = prepare_split(corpus, experiment, seed)?;
        for &strategy in strategies {
            let cfg = ActiveLearningConfig {
                strategy,
                seed,
                ..*al_config
            };
            let mut oracle = split.oracle.clone();
            let h = run_cycle(split.pool.clone(), &mut oracle, train_config, &cfg, Some(&split.test))?;
            histories.entry(strategy).or_default().push(h);
        }
    }
    let summary = histories
        .iter()
        .map(|(&strategy, hs)| {
            let reached: Vec<Option<usize>> = hs
                .iter()
                .map(|h| h.labels_to_accuracy(experiment.target_accuracy))
                .collect();
            let finals: Vec<f64> = hs
                .iter()
                .filter_map(|h| LearningCurve::from_history(h).final_accuracy())
                .collect();
            StrategySummary {
                strategy,
                runs: hs.len(),
                reached: reached.iter().filter(|r| r.is_some()).count(),
                median_labels_to_target: median_with_unreached(&reached),
                mean_final_accuracy: finals.iter().sum::<f64>() / finals.len().max(1) as f64,
            }
        })
        .collect();
    Ok(Comparison {
        target_accuracy: experiment.target_accuracy,
        seeds,
        histories,
        summary,
    })
}
