use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{tokenize, VectorizeError, VectorizerConfig};
use crate::corpus::Corpus;
use crate::fingerprint::{Fingerprint, FingerprintBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub index: usize,
    pub df: usize,
    pub idf: f64,
}

/// Frozen word -> feature mapping with document frequencies and IDF values.
///
/// Indices are dense and assigned in lexicographic word order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    entries: BTreeMap<String, DictionaryEntry>,
    n_docs: usize,
    config_fingerprint: Fingerprint,
    fingerprint: Fingerprint,
}

pub fn build_dictionary(corpus: &Corpus, config: &VectorizerConfig) -> Result<Dictionary, VectorizeError> {
    build_dictionary_from_texts(corpus.messages().iter().map(|m| m.text()), config)
}

pub fn build_dictionary_from_texts<I, S>(texts: I, config: &VectorizerConfig) -> Result<Dictionary, VectorizeError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    config.validate()?;
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_docs = 0usize;
    for text in texts {
        n_docs += 1;
        let distinct: BTreeSet<String> = tokenize(text.as_ref(), config).into_iter().collect();
        for w in distinct {
            *df.entry(w).or_insert(0) += 1;
        }
    }
    if n_docs == 0 {
        return Err(VectorizeError::EmptyCorpus);
    }
    let entries: Vec<(String, DictionaryEntry)> = df
        .into_iter()
        .filter(|&(_, d)| d >= config.min_df)
        .enumerate()
        .map(|(index, (w, df))| {
            let idf = libm::log(n_docs as f64 / df as f64);
            (w, DictionaryEntry { index, df, idf })
        })
        .collect();
    if entries.is_empty() {
        return Err(VectorizeError::NoSurvivingWords { min_df: config.min_df });
    }
    Ok(Dictionary::from_entries(entries, n_docs, config.fingerprint()))
}

impl Dictionary {
    /// Assembles a dictionary from stored parts without validation. Use
    /// [`Dictionary::from_parts`] for untrusted input.
    pub fn from_entries(
        entries: Vec<(String, DictionaryEntry)>,
        n_docs: usize,
        config_fingerprint: Fingerprint,
    ) -> Dictionary {
        let entries: BTreeMap<String, DictionaryEntry> = entries.into_iter().collect();
        let fingerprint = content_fingerprint(&entries, n_docs, config_fingerprint);
        Dictionary {
            entries,
            n_docs,
            config_fingerprint,
            fingerprint,
        }
    }

    /// Validating constructor: dense indices, `1 <= df <= n_docs`,
    /// `df >= min_df`, and `idf >= 0`.
    pub fn from_parts(
        entries: Vec<(String, DictionaryEntry)>,
        n_docs: usize,
        config_fingerprint: Fingerprint,
        min_df: usize,
    ) -> Result<Dictionary, VectorizeError> {
        let bad = |m: String| Err(VectorizeError::InconsistentDictionary(m));
        let mut seen = alloc::vec![false; entries.len()];
        for (w, e) in &entries {
            if e.index >= entries.len() || core::mem::replace(&mut seen[e.index], true) {
                return bad(format!("word {w:?} has non-dense or repeated index {}", e.index));
            }
            if e.df < min_df.max(1) || e.df > n_docs {
                return bad(format!("word {w:?} has df {} outside [{min_df}, {n_docs}]", e.df));
            }
            if !(e.idf >= 0.0) {
                return bad(format!("word {w:?} has negative idf"));
            }
        }
        let n = entries.len();
        let d = Self::from_entries(entries, n_docs, config_fingerprint);
        if d.entries.len() != n {
            return bad("duplicate word".into());
        }
        Ok(d)
    }

    /// Number of features `d`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn config_fingerprint(&self) -> Fingerprint {
        self.config_fingerprint
    }

    /// Fingerprint of the full dictionary content; feature vectors and
    /// models carry it.
    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn entry(&self, word: &str) -> Option<&DictionaryEntry> {
        self.entries.get(word)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.entry(word).map(|e| e.index)
    }

    pub fn df(&self, word: &str) -> Option<usize> {
        self.entry(word).map(|e| e.df)
    }

    pub fn idf_of(&self, word: &str) -> Option<f64> {
        self.entry(word).map(|e| e.idf)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Words in lexicographic (= index) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &DictionaryEntry)> {
        self.entries.iter().map(|(w, e)| (w.as_str(), e))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn content_fingerprint(
    entries: &BTreeMap<String, DictionaryEntry>,
    n_docs: usize,
    config: Fingerprint,
) -> Fingerprint {
    let mut b = FingerprintBuilder::new();
    b.str("dictionary/1").u64(config.0).u64(n_docs as u64);
    for (w, e) in entries {
        b.str(w).u64(e.index as u64).u64(e.df as u64).f64(e.idf);
    }
    b.finish()
}
