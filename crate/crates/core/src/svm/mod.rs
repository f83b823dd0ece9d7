//! Linear soft-margin SVM trained on its dual.
//!
//! The decision function is `f(x) = w.x - b` with `w = sum_i a_i y_i x_i`.
//! Labels map to signs as nonspam = +1, spam = -1, so larger scores mean
//! "more legitimate".

mod codec;
mod solver;

pub use codec::{deserialize_model, serialize_model, CodecError, MODEL_FORMAT_VERSION};

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fingerprint::Fingerprint;
use crate::vectorizer::FeatureVector;
use crate::Label;

/// Stopping gap of the pair solver relative to `kkt_tol`. Solving well past
/// the requested tolerance keeps KKT checks on the returned model comfortably
/// inside `kkt_tol` and makes `alpha` reproducible enough for support-set
/// comparisons between retrainings.
const GAP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub x: FeatureVector,
    pub y: Label,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, x: FeatureVector, y: Label) -> Self {
        LabeledExample { id: id.into(), x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Box constraint on every dual variable.
    pub c: f64,
    pub kkt_tol: f64,
    /// Solver sweep limit; one sweep is N pair updates. `None` means `10 * N`.
    pub max_passes: Option<u64>,
    /// Tie-break seed. The working-pair choice already breaks ties by lowest
    /// index, so the seed is recorded but does not change the result.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 100.0,
            kkt_tol: 1e-3,
            max_passes: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// Dual values above this count as support vectors.
    pub fn alpha_zero_threshold(&self) -> f64 {
        1e-8 * self.c
    }

    fn validate(&self) -> Result<(), TrainError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(TrainError::InvalidConfig("C must be positive and finite"));
        }
        if !(self.kkt_tol > 0.0 && self.kkt_tol.is_finite()) {
            return Err(TrainError::InvalidConfig("kkt_tol must be positive and finite"));
        }
        if self.max_passes == Some(0) {
            return Err(TrainError::InvalidConfig("max_passes must be at least 1"));
        }
        Ok(())
    }
}

/// Dual value of one training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCoef {
    pub id: String,
    pub y: Label,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    w: Vec<f64>,
    b: f64,
    alphas: Vec<DualCoef>,
    support_ids: Vec<String>,
    dictionary_fingerprint: Fingerprint,
    config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    /// Final dual objective `sum a - 1/2 |w|^2`.
    pub objective: f64,
    /// `1 / |w|`; absent for a zero weight vector.
    pub geometric_margin: Option<f64>,
    /// Per-example slack, in training order.
    pub slacks: Vec<f64>,
    pub n_support: usize,
    pub n_bounded: usize,
    pub passes: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no training examples")]
    NoExamples,
    #[error("training set has no {0} examples; both classes are required")]
    MissingClass(Label),
    #[error("training examples come from different dictionaries ({0} and {1})")]
    FingerprintMixture(Fingerprint, Fingerprint),
    #[error("duplicate training example id {0:?}")]
    DuplicateId(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("solver did not converge within {passes} passes")]
    NotConverged {
        passes: u64,
        best_effort: Box<(SvmModel, TrainDiagnostics)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("feature vector from dictionary {vector} does not match model dictionary {model}")]
    FingerprintMismatch { model: Fingerprint, vector: Fingerprint },
    #[error("model has a zero weight vector")]
    DegenerateModel,
}

/// Trains on `examples`; the feature dimension is inferred from the largest
/// index seen.
pub fn train(examples: &[LabeledExample], config: &TrainConfig) -> Result<(SvmModel, TrainDiagnostics), TrainError> {
    let dim = examples
        .iter()
        .filter_map(|e| e.x.max_index())
        .max()
        .map_or(0, |m| m + 1);
    train_with_dim(examples, dim, config)
}

/// Trains with an explicit feature dimension (normally the dictionary size).
pub fn train_with_dim(
    examples: &[LabeledExample],
    dim: usize,
    config: &TrainConfig,
) -> Result<(SvmModel, TrainDiagnostics), TrainError> {
    config.validate()?;
    let first = examples.first().ok_or(TrainError::NoExamples)?;
    let fp = first.x.dictionary();
    if let Some(e) = examples.iter().find(|e| e.x.dictionary() != fp) {
        return Err(TrainError::FingerprintMixture(fp, e.x.dictionary()));
    }
    for label in Label::BOTH {
        if !examples.iter().any(|e| e.y == label) {
            return Err(TrainError::MissingClass(label));
        }
    }
    let mut ids = BTreeSet::new();
    for e in examples {
        if !ids.insert(e.id.as_str()) {
            return Err(TrainError::DuplicateId(e.id.clone()));
        }
    }
    let dim = dim.max(examples.iter().filter_map(|e| e.x.max_index()).max().map_or(0, |m| m + 1));

    let n = examples.len();
    let problem = solver::Problem {
        xs: examples.iter().map(|e| &e.x).collect(),
        ys: examples.iter().map(|e| e.y.sign()).collect(),
        c: config.c,
    };
    let max_passes = config.max_passes.unwrap_or(10 * n as u64);
    let max_iter = usize::try_from(max_passes.saturating_mul(n as u64)).unwrap_or(usize::MAX);
    let sol = problem.solve(config.kkt_tol * GAP_FRACTION, max_iter);

    let (model, diag) = assemble(examples, &problem.ys, sol.alpha, dim, fp, config, sol.iterations);
    if !sol.converged {
        return Err(TrainError::NotConverged {
            passes: diag.passes,
            best_effort: Box::new((model, diag)),
        });
    }
    Ok((model, diag))
}

fn assemble(
    examples: &[LabeledExample],
    ys: &[f64],
    alpha: Vec<f64>,
    dim: usize,
    fp: Fingerprint,
    config: &TrainConfig,
    iterations: usize,
) -> (SvmModel, TrainDiagnostics) {
    let c = config.c;
    let mut w = alloc::vec![0.0; dim];
    for ((e, &a), &y) in examples.iter().zip(&alpha).zip(ys) {
        if a != 0.0 {
            e.x.add_scaled_to(&mut w, a * y);
        }
    }
    // v_t = y_t - w.x_t; optimal offsets c = -b satisfy M <= c <= m
    let v: Vec<f64> = examples.iter().zip(ys).map(|(e, &y)| y - e.x.dot_dense(&w)).collect();

    let free: Vec<usize> = (0..alpha.len()).filter(|&t| alpha[t] > 0.0 && alpha[t] < c).collect();
    let b = if !free.is_empty() {
        free.iter().map(|&t| -v[t]).sum::<f64>() / free.len() as f64
    } else {
        // c must be >= v_t for (y=+1, a=0) and (y=-1, a=C),
        // and <= v_t for (y=-1, a=0) and (y=+1, a=C).
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for t in 0..alpha.len() {
            let at_zero = alpha[t] <= 0.0;
            if (ys[t] > 0.0) == at_zero {
                lo = lo.max(v[t]);
            } else {
                hi = hi.min(v[t]);
            }
        }
        let offset = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        };
        -offset
    };

    let threshold = config.alpha_zero_threshold();
    let alphas: Vec<DualCoef> = examples
        .iter()
        .zip(&alpha)
        .map(|(e, &a)| DualCoef {
            id: e.id.clone(),
            y: e.y,
            alpha: a,
        })
        .collect();
    let support_ids = support_ids_of(&alphas, threshold);

    let norm_sq: f64 = w.iter().map(|x| x * x).sum();
    let objective = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
    let slacks = examples
        .iter()
        .zip(ys)
        .map(|(e, &y)| (1.0 - y * (e.x.dot_dense(&w) - b)).max(0.0))
        .collect();
    let n = examples.len().max(1);
    let diag = TrainDiagnostics {
        objective,
        geometric_margin: (norm_sq > 0.0).then(|| 1.0 / libm::sqrt(norm_sq)),
        slacks,
        n_support: support_ids.len(),
        n_bounded: alpha.iter().filter(|&&a| a >= c).count(),
        passes: iterations.div_ceil(n) as u64,
        iterations: iterations as u64,
    };
    let model = SvmModel {
        w,
        b,
        alphas,
        support_ids,
        dictionary_fingerprint: fp,
        config: *config,
    };
    (model, diag)
}

fn support_ids_of(alphas: &[DualCoef], threshold: f64) -> Vec<String> {
    alphas
        .iter()
        .filter(|a| a.alpha > threshold)
        .map(|a| a.id.clone())
        .collect()
}

impl SvmModel {
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn bias(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn alphas(&self) -> &[DualCoef] {
        &self.alphas
    }

    pub fn alpha_of(&self, id: &str) -> Option<f64> {
        self.alphas.iter().find(|a| a.id == id).map(|a| a.alpha)
    }

    /// Ids of training examples with `alpha > 1e-8 * C`, in training order.
    pub fn support_ids(&self) -> &[String] {
        &self.support_ids
    }

    pub fn support_set(&self) -> BTreeSet<&str> {
        self.support_ids.iter().map(String::as_str).collect()
    }

    pub fn dictionary_fingerprint(&self) -> Fingerprint {
        self.dictionary_fingerprint
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    fn check(&self, x: &FeatureVector) -> Result<(), ModelError> {
        if x.dictionary() != self.dictionary_fingerprint {
            return Err(ModelError::FingerprintMismatch {
                model: self.dictionary_fingerprint,
                vector: x.dictionary(),
            });
        }
        Ok(())
    }

    /// `f(x) = w.x - b`.
    pub fn decision_value(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check(x)?;
        Ok(x.dot_dense(&self.w) - self.b)
    }

    /// Sign of the decision value; exactly zero is nonspam.
    pub fn classify(&self, x: &FeatureVector) -> Result<Label, ModelError> {
        self.decision_value(x).map(Label::from_score)
    }

    /// `max(0, 1 - y f(x))`.
    pub fn slack_of(&self, ex: &LabeledExample) -> Result<f64, ModelError> {
        let f = self.decision_value(&ex.x)?;
        Ok(slack(ex.y, f))
    }

    /// Distance from the separating hyperplane to either support hyperplane,
    /// `1 / |w|`. The full gap between the two support hyperplanes is twice this.
    pub fn geometric_margin(&self) -> Result<f64, ModelError> {
        let n = libm::sqrt(self.w.iter().map(|x| x * x).sum::<f64>());
        if n > 0.0 {
            Ok(1.0 / n)
        } else {
            Err(ModelError::DegenerateModel)
        }
    }

    /// Builds a model from stored parts. Used by the decoder and by tests
    /// that need a hand-specified hyperplane.
    pub fn from_parts(
        w: Vec<f64>,
        b: f64,
        alphas: Vec<DualCoef>,
        dictionary_fingerprint: Fingerprint,
        config: TrainConfig,
    ) -> SvmModel {
        let support_ids = support_ids_of(&alphas, config.alpha_zero_threshold());
        SvmModel {
            w,
            b,
            alphas,
            support_ids,
            dictionary_fingerprint,
            config,
        }
    }
}

pub fn slack(y: Label, f: f64) -> f64 {
    (1.0 - y.sign() * f).max(0.0)
}
