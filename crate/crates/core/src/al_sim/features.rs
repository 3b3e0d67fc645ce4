//! Signed feature hashing over unigram and bigram token ids.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::corpus::Document;
use crate::tokenizer::{TokenId, Vocabulary};

pub const MIN_DIM: usize = 1 << 10;
pub const DEFAULT_DIM: usize = 1 << 14;

const UNIGRAM_SALT: u64 = 0x5851_f42d_4c95_7f2d;
const BIGRAM_SALT: u64 = 0x1405_7b7e_f767_814f;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .unzip();
        SparseVec {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Squared Euclidean distance, accumulated coordinate by coordinate.
    pub fn dist_sq(&self, other: &SparseVec) -> f64 {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            let d = if j == b.len() || (i < a.len() && a[i] < b[j]) {
                i += 1;
                self.values[i - 1]
            } else if i == a.len() || b[j] < a[i] {
                j += 1;
                -other.values[j - 1]
            } else {
                i += 1;
                j += 1;
                self.values[i - 1] - other.values[j - 1]
            };
            acc += d * d;
        }
        acc
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps documents into a fixed `dim`-dimensional space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHasher {
    dim: usize,
}

impl FeatureHasher {
    pub fn new(dim: usize) -> Result<Self, SimError> {
        if dim < MIN_DIM || !dim.is_power_of_two() {
            return Err(SimError::InvalidDim(dim));
        }
        Ok(FeatureHasher { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn bucket(&self, h: u64) -> (u32, f64) {
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        ((h as usize & (self.dim - 1)) as u32, sign)
    }

    /// Hash the word ids (sentence markers excluded) of one document.
    /// Documents with no words, or whose hashed counts cancel to zero, map
    /// to the single feature `e_0`.
    pub fn hash_ids(&self, words: &[TokenId]) -> SparseVec {
        let mut raw: Vec<(u32, f64)> = Vec::with_capacity(words.len() * 2);
        for &w in words {
            raw.push(self.bucket(mix(u64::from(w) ^ UNIGRAM_SALT)));
        }
        for pair in words.windows(2) {
            let key = (u64::from(pair[0]) << 32) | u64::from(pair[1]);
            raw.push(self.bucket(mix(key ^ BIGRAM_SALT)));
        }
        raw.sort_unstable_by_key(|&(i, _)| i);

        let mut v = SparseVec {
            dim: self.dim,
            ..SparseVec::default()
        };
        for (i, x) in raw {
            if v.indices.last() == Some(&i) {
                *v.values.last_mut().unwrap() += x;
            } else {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        // Opposite signs can cancel a bucket exactly.
        if v.values.contains(&0.0) {
            let (i, x) = v.iter().filter(|(_, x)| *x != 0.0).map(|(i, x)| (i as u32, x)).unzip();
            (v.indices, v.values) = (i, x);
        }

        let norm = v.norm_sq().sqrt();
        if norm == 0.0 {
            return SparseVec {
                dim: self.dim,
                indices: vec![0],
                values: vec![1.0],
            };
        }
        v.values.iter_mut().for_each(|x| *x /= norm);
        v
    }

    pub fn featurize(&self, doc: &Document, vocab: &Vocabulary) -> SparseVec {
        let ids = vocab.tokenize(&doc.text);
        // Drop the sentence markers.
        self.hash_ids(&ids[1..ids.len() - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dims() {
        assert!(FeatureHasher::new(1000).is_err());
        assert!(FeatureHasher::new(512).is_err());
        assert!(FeatureHasher::new(1024).is_ok());
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let v = Vocabulary::build(["the cat sat on the mat"], 1).unwrap();
        let h = FeatureHasher::new(1024).unwrap();
        let d = Document::new(1, "the cat sat on the mat", None);
        let a = h.featurize(&d, &v);
        assert_eq!(a, h.featurize(&d, &v));
        assert!((a.norm_sq() - 1.0).abs() < 1e-12);
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_doc_is_bias_feature() {
        let v = Vocabulary::build(["a"], 1).unwrap();
        let h = FeatureHasher::new(1024).unwrap();
        let e = h.featurize(&Document::new(1, "   ", None), &v);
        assert_eq!((e.indices, e.values), (vec![0], vec![1.0]));
    }

    #[test]
    fn sparse_distance_matches_dense() {
        let a = SparseVec::from_dense(&[1.0, 0.0, 2.0, 0.0]);
        let b = SparseVec::from_dense(&[0.0, 3.0, 2.0, -1.0]);
        assert_eq!(a.dist_sq(&b), 1.0 + 9.0 + 0.0 + 1.0);
        assert_eq!(a.dist_sq(&a), 0.0);
    }
}
