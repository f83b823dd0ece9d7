use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::VectorizeError;
use crate::fingerprint::Fingerprint;

/// Sparse feature vector. Entries are sorted by strictly increasing index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
    normalized: bool,
    dictionary: Fingerprint,
}

impl FeatureVector {
    pub(crate) fn from_sorted_unchecked(entries: Vec<(usize, f64)>, dictionary: Fingerprint) -> Self {
        FeatureVector {
            entries,
            normalized: false,
            dictionary,
        }
    }

    /// Sparse constructor; indices must be strictly increasing and values finite.
    pub fn from_sparse(entries: Vec<(usize, f64)>, dictionary: Fingerprint) -> Result<Self, VectorizeError> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(VectorizeError::MalformedVector("indices not strictly increasing"));
        }
        if entries.iter().any(|&(_, v)| !v.is_finite()) {
            return Err(VectorizeError::MalformedVector("non-finite value"));
        }
        Ok(Self::from_sorted_unchecked(entries, dictionary))
    }

    /// Dense constructor; zero coordinates are dropped. No normalization.
    pub fn from_dense(values: &[f64], dictionary: Fingerprint) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self::from_sorted_unchecked(entries, dictionary)
    }

    /// Scales to unit Euclidean length. Zero vectors stay zero and unflagged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for (_, v) in &mut self.entries {
                *v /= n;
            }
            self.normalized = true;
        }
        self
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// True when unit normalization was applied.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// All-zero vector: the message shares no weighted word with the dictionary.
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dictionary(&self) -> Fingerprint {
        self.dictionary
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    /// Dot product against a dense vector. Indices past its end count as zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(i, v)| dense.get(i).map(|w| w * v))
            .sum()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    /// `dense += scale * self`. `dense` must be long enough.
    pub fn add_scaled_to(&self, dense: &mut [f64], scale: f64) {
        for &(i, v) in &self.entries {
            dense[i] += scale * v;
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = alloc::vec![0.0; dim];
        self.add_scaled_to(&mut d, 1.0);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_dot_matches_dense() {
        let fp = Fingerprint(9);
        let a = FeatureVector::from_dense(&[1.0, 0.0, 2.0, 0.0, 3.0], fp);
        let b = FeatureVector::from_dense(&[0.5, 4.0, 0.0, 0.0, -1.0], fp);
        assert_eq!(a.dot(&b), 0.5 - 3.0);
        assert_eq!(a.dot_dense(&b.to_dense(5)), a.dot(&b));
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn malformed_sparse_rejected() {
        let fp = Fingerprint(0);
        assert!(FeatureVector::from_sparse(alloc::vec![(2, 1.0), (1, 1.0)], fp).is_err());
        assert!(FeatureVector::from_sparse(alloc::vec![(1, 1.0), (1, 1.0)], fp).is_err());
        assert!(FeatureVector::from_sparse(alloc::vec![(1, f64::NAN)], fp).is_err());
        assert!(FeatureVector::from_sparse(alloc::vec![(1, 1.0), (3, 2.0)], fp).is_ok());
    }

    #[test]
    fn normalization() {
        let v = FeatureVector::from_dense(&[3.0, 4.0], Fingerprint(0)).normalized();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        assert!(v.is_normalized());
        let z = FeatureVector::from_dense(&[0.0, 0.0], Fingerprint(0)).normalized();
        assert!(z.is_zero() && !z.is_normalized());
    }
}
