//! Raw messages and corpora, before vectorization.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::Label;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus contains no messages")]
    Empty,
    #[error("duplicate message id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMessage {
    pub id: String,
    pub subject: String,
    pub body: String,
    pub received_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<Label>,
}

impl RawMessage {
    pub fn new(id: impl Into<String>, subject: impl Into<String>, body: impl Into<String>) -> Self {
        RawMessage {
            id: id.into(),
            subject: subject.into(),
            body: body.into(),
            received_at: 0,
            true_label: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.true_label = Some(label);
        self
    }

    /// A message whose body is blank. Still loadable and vectorizable.
    pub fn is_degenerate(&self) -> bool {
        self.body.trim().is_empty()
    }

    /// Text fed to the tokenizer: subject and body joined by a space.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.subject.len() + self.body.len() + 1);
        s.push_str(&self.subject);
        s.push(' ');
        s.push_str(&self.body);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    messages: Vec<RawMessage>,
    label_counts: BTreeMap<Label, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids. An empty message list is
    /// allowed here; loaders decide whether emptiness is an error.
    pub fn new(messages: Vec<RawMessage>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        let mut label_counts = BTreeMap::new();
        for m in &messages {
            if !seen.insert(m.id.as_str()) {
                return Err(CorpusError::DuplicateId(m.id.clone()));
            }
            if let Some(l) = m.true_label {
                *label_counts.entry(l).or_insert(0) += 1;
            }
        }
        Ok(Corpus {
            messages,
            label_counts,
        })
    }

    pub fn non_empty(messages: Vec<RawMessage>) -> Result<Self, CorpusError> {
        if messages.is_empty() {
            return Err(CorpusError::Empty);
        }
        Self::new(messages)
    }

    pub fn messages(&self) -> &[RawMessage] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<RawMessage> {
        self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn label_counts(&self) -> &BTreeMap<Label, usize> {
        &self.label_counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.label_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn n_labeled(&self) -> usize {
        self.label_counts.values().sum()
    }

    pub fn get(&self, id: &str) -> Option<&RawMessage> {
        self.messages.iter().find(|m| m.id == id)
    }

    /// Stratified split: within each class, messages are shuffled with `seed`
    /// and the first `round(train_fraction * n_class)` go to the training side.
    /// Unlabeled messages always go to the training side. Both halves keep
    /// the original corpus order.
    pub fn stratified_split(&self, train_fraction: f64, seed: u64) -> (Corpus, Corpus) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut in_train = alloc::vec![true; self.messages.len()];
        for label in Label::BOTH {
            let mut idx: Vec<usize> = (0..self.messages.len())
                .filter(|&i| self.messages[i].true_label == Some(label))
                .collect();
            idx.shuffle(&mut rng);
            let n_train = libm::round(train_fraction * idx.len() as f64) as usize;
            for &i in &idx[n_train.min(idx.len())..] {
                in_train[i] = false;
            }
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (m, t) in self.messages.iter().zip(in_train) {
            if t {
                train.push(m.clone());
            } else {
                test.push(m.clone());
            }
        }
        // ids were unique in self, so they are unique in each half
        (
            Corpus::new(train).expect("unique ids"),
            Corpus::new(test).expect("unique ids"),
        )
    }
}
