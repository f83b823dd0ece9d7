//! Core algorithms for SVM-based e-mail triage.
//!
//! Everything in this crate is pure computation over in-memory data: message
//! corpora, TF-IDF vectorization, a linear soft-margin SVM trained on its dual,
//! pool-based active learning, evaluation metrics, and the training/active mode
//! controller that ranks a bounded mailbox. File formats, the CLI and the HTTP
//! service live in the `spamsift` crate.
//!
//! The crate builds without `std` (it needs `alloc`).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod active;
pub mod controller;
pub mod corpus;
pub mod eval;
pub mod fingerprint;
mod label;
pub mod svm;
pub mod synthetic;
pub mod vectorizer;

pub use active::{
    init_training_set, run_cycle, select_batch, ActiveLearningConfig, Batch, CycleError,
    CycleHistory, IterationRecord, LabelSource, Pool, SelectionStrategy, StopRule,
};
pub use controller::{Controller, ControllerConfig, ControllerError, Mode};
pub use corpus::{Corpus, CorpusError, RawMessage};
pub use eval::{compare_strategies, confusion, rates, ConfusionCounts, EvalReport};
pub use fingerprint::Fingerprint;
pub use label::{Label, ParseLabelError};
pub use svm::{train, LabeledExample, SvmModel, TrainConfig, TrainDiagnostics, TrainError};
pub use synthetic::{generate_synthetic_corpus, VocabSpec};
pub use vectorizer::{
    build_dictionary, tokenize, vectorize, Dictionary, FeatureVector, VectorizeError,
    VectorizerConfig,
};
