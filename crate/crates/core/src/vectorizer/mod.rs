//! TF-IDF features over a document-frequency-thresholded dictionary.
//!
//! A word becomes a feature only if it occurs in at least `min_df` documents.
//! Each feature weight is `tf * ln(n_docs / df)` with `tf` the raw count of
//! the word in the message, and the vector is scaled to unit Euclidean length.

mod dictionary;
mod features;
mod tokenize;

pub use dictionary::{build_dictionary, build_dictionary_from_texts, Dictionary, DictionaryEntry};
pub use features::FeatureVector;
pub use tokenize::{tokenize, PUNCTUATION, STOPLIST};

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::RawMessage;
use crate::fingerprint::{Fingerprint, FingerprintBuilder};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VectorizeError {
    #[error("cannot build a dictionary from an empty corpus")]
    EmptyCorpus,
    #[error("no word occurs in at least min_df = {min_df} documents; lower min_df")]
    NoSurvivingWords { min_df: usize },
    #[error("invalid vectorizer config: {0}")]
    InvalidConfig(&'static str),
    #[error("dictionary was built with config {dictionary} but vectorizer config is {config}")]
    ConfigMismatch {
        dictionary: Fingerprint,
        config: Fingerprint,
    },
    #[error("malformed feature vector: {0}")]
    MalformedVector(&'static str),
    #[error("inconsistent dictionary: {0}")]
    InconsistentDictionary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    pub min_df: usize,
    pub use_stoplist: bool,
    pub keep_punctuation_tokens: bool,
    pub lowercase: bool,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig {
            min_df: 3,
            use_stoplist: false,
            keep_punctuation_tokens: true,
            lowercase: true,
        }
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<(), VectorizeError> {
        if self.min_df == 0 {
            return Err(VectorizeError::InvalidConfig("min_df must be at least 1"));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> Fingerprint {
        FingerprintBuilder::new()
            .str("vectorizer-config/1")
            .u64(self.min_df as u64)
            .u64(self.use_stoplist as u64)
            .u64(self.keep_punctuation_tokens as u64)
            .u64(self.lowercase as u64)
            .finish()
    }
}

/// Term counts of a token sequence.
pub(crate) fn term_counts<I, S>(tokens: I) -> BTreeMap<S, usize>
where
    I: IntoIterator<Item = S>,
    S: Ord,
{
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Vectorizes a message (subject and body) against a frozen dictionary.
pub fn vectorize(
    msg: &RawMessage,
    dict: &Dictionary,
    config: &VectorizerConfig,
) -> Result<FeatureVector, VectorizeError> {
    vectorize_text(&msg.text(), dict, config)
}

pub fn vectorize_text(
    text: &str,
    dict: &Dictionary,
    config: &VectorizerConfig,
) -> Result<FeatureVector, VectorizeError> {
    let fp = config.fingerprint();
    if fp != dict.config_fingerprint() {
        return Err(VectorizeError::ConfigMismatch {
            dictionary: dict.config_fingerprint(),
            config: fp,
        });
    }
    let counts = term_counts(tokenize(text, config));
    let mut entries: alloc::vec::Vec<(usize, f64)> = counts
        .iter()
        .filter_map(|(w, &tf)| {
            let e = dict.entry(w)?;
            Some((e.index, tf as f64 * e.idf))
        })
        .filter(|&(_, v)| v != 0.0)
        .collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    Ok(FeatureVector::from_sorted_unchecked(entries, dict.fingerprint()).normalized())
}
