//! Deterministic synthetic corpora for desk-scale experiments.
//!
//! Each class owns a vocabulary of `words_per_class` words; a fraction
//! `overlap` of each vocabulary is shared with the other class. Word
//! frequencies within a class follow a Zipf-like law over a class-specific
//! random ranking. Every word of a message is drawn from its own class with
//! probability `1 - cross_talk` and from the other class otherwise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, RawMessage};
use crate::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabSpec {
    pub words_per_class: usize,
    /// Fraction of each class vocabulary shared with the other class.
    pub overlap: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub zipf_exponent: f64,
    /// Probability that a word is drawn from the opposite class.
    pub cross_talk: f64,
    /// Words of each message that go into the subject line.
    pub subject_words: usize,
}

impl Default for VocabSpec {
    fn default() -> Self {
        VocabSpec {
            words_per_class: 60,
            overlap: 0.2,
            min_words: 30,
            max_words: 80,
            zipf_exponent: 1.0,
            cross_talk: 0.3,
            subject_words: 4,
        }
    }
}

impl VocabSpec {
    pub fn with_overlap(mut self, overlap: f64) -> Self {
        self.overlap = overlap;
        self
    }

    fn shared(&self) -> usize {
        let s = libm::round(self.overlap.clamp(0.0, 1.0) * self.words_per_class as f64) as usize;
        s.min(self.words_per_class)
    }

    /// Word list of one class (spam words first, shared block in the middle).
    fn class_words(&self, label: Label) -> Vec<usize> {
        let n = self.words_per_class;
        let start = match label {
            Label::Spam => 0,
            Label::Nonspam => n - self.shared(),
        };
        (start..start + n).collect()
    }

    pub fn total_words(&self) -> usize {
        2 * self.words_per_class - self.shared()
    }
}

fn word(i: usize) -> String {
    // alphabetic only so the tokenizer keeps each word whole
    let mut s = String::from("w");
    let mut v = i;
    for _ in 0..3 {
        s.push((b'a' + (v % 26) as u8) as char);
        v /= 26;
    }
    s
}

struct ClassSampler {
    words: Vec<usize>,
    dist: WeightedIndex<f64>,
}

impl ClassSampler {
    fn new(spec: &VocabSpec, label: Label, rng: &mut ChaCha8Rng) -> Self {
        let mut words = spec.class_words(label);
        words.shuffle(rng);
        let weights: Vec<f64> = (0..words.len())
            .map(|r| 1.0 / libm::pow((r + 1) as f64, spec.zipf_exponent))
            .collect();
        ClassSampler {
            words,
            dist: WeightedIndex::new(weights).expect("positive weights"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        self.words[self.dist.sample(rng)]
    }
}

/// Generates `n_spam + n_nonspam` labeled messages. The output is a pure
/// function of the arguments.
pub fn generate_synthetic_corpus(
    n_spam: usize,
    n_nonspam: usize,
    spec: &VocabSpec,
    seed: u64,
) -> Result<Corpus, CorpusError> {
    if n_spam == 0 && n_nonspam == 0 {
        return Err(CorpusError::Empty);
    }
    assert!(spec.words_per_class > 0, "empty vocabulary");
    assert!(spec.min_words <= spec.max_words, "min_words > max_words");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spam = ClassSampler::new(spec, Label::Spam, &mut rng);
    let ham = ClassSampler::new(spec, Label::Nonspam, &mut rng);

    let mut messages = Vec::with_capacity(n_spam + n_nonspam);
    let plan = [(Label::Nonspam, "ham", n_nonspam), (Label::Spam, "spam", n_spam)];
    for (label, dir, count) in plan {
        let (own, other) = match label {
            Label::Spam => (&spam, &ham),
            Label::Nonspam => (&ham, &spam),
        };
        for i in 0..count {
            let len = rng.gen_range(spec.min_words..=spec.max_words);
            let mut words = Vec::with_capacity(len);
            for _ in 0..len {
                let sampler = if rng.gen_bool(spec.cross_talk.clamp(0.0, 1.0)) {
                    other
                } else {
                    own
                };
                words.push(word(sampler.draw(&mut rng)));
            }
            let split = spec.subject_words.min(words.len());
            let subject = words[..split].join(" ");
            let body = words[split..].join(" ");
            let mut msg = RawMessage::new(format!("{dir}/{i:04}"), subject, body).with_label(label);
            msg.received_at = messages.len() as u64;
            messages.push(msg);
        }
    }
    Corpus::new(messages)
}
