//! Batch train / evaluate / classify over corpora and stored dictionaries.

use spamsift_core::svm::{train_with_dim, ModelError};
use spamsift_core::vectorizer::vectorize_text;
use spamsift_core::{
    confusion, rates, Corpus, Dictionary, EvalReport, Label, LabeledExample, RawMessage, SvmModel, TrainConfig,
    TrainDiagnostics, TrainError, VectorizeError, VectorizerConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] spamsift_core::eval::EvalError),
    #[error("model was trained on dictionary {model}, but the dictionary given is {dictionary}")]
    DictionaryMismatch { model: String, dictionary: String },
    #[error("corpus has no labeled messages")]
    NoLabels,
}

pub fn vectorize_message(m: &RawMessage, dict: &Dictionary, config: &VectorizerConfig) -> Result<spamsift_core::FeatureVector, PipelineError> {
    Ok(vectorize_text(&m.text(), dict, config)?)
}

/// The labeled messages of `corpus` as training examples; unlabeled ones
/// are skipped.
pub fn labeled_examples(corpus: &Corpus, dict: &Dictionary, config: &VectorizerConfig) -> Result<Vec<LabeledExample>, PipelineError> {
    corpus
        .messages()
        .iter()
        .filter_map(|m| m.true_label.map(|y| (m, y)))
        .map(|(m, y)| Ok(LabeledExample::new(m.id.clone(), vectorize_message(m, dict, config)?, y)))
        .collect()
}

pub fn train_corpus(
    corpus: &Corpus,
    dict: &Dictionary,
    config: &VectorizerConfig,
    train: &TrainConfig,
) -> Result<(SvmModel, TrainDiagnostics), PipelineError> {
    let examples = labeled_examples(corpus, dict, config)?;
    if examples.is_empty() {
        return Err(PipelineError::NoLabels);
    }
    Ok(train_with_dim(&examples, dict.len(), train)?)
}

pub fn check_pair(model: &SvmModel, dict: &Dictionary) -> Result<(), PipelineError> {
    if model.dictionary_fingerprint() != dict.fingerprint() {
        return Err(PipelineError::DictionaryMismatch {
            model: model.dictionary_fingerprint().to_string(),
            dictionary: dict.fingerprint().to_string(),
        });
    }
    Ok(())
}

pub fn evaluate(model: &SvmModel, corpus: &Corpus, dict: &Dictionary, config: &VectorizerConfig) -> Result<EvalReport, PipelineError> {
    check_pair(model, dict)?;
    let test = labeled_examples(corpus, dict, config)?;
    if test.is_empty() {
        return Err(PipelineError::NoLabels);
    }
    Ok(rates(&confusion(model, &test)?)?)
}

pub fn classify(model: &SvmModel, dict: &Dictionary, config: &VectorizerConfig, m: &RawMessage) -> Result<(Label, f64), PipelineError> {
    check_pair(model, dict)?;
    let f = model.decision_value(&vectorize_message(m, dict, config)?)?;
    Ok((Label::from_score(f), f))
}
