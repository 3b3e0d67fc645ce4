//! Acquisition strategies: random, least confidence and greedy k-center.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::SparseVec;
use super::SimError;
use crate::corpus::DocId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionStrategy {
    Random,
    #[default]
    LeastConfidence,
    Coreset,
}

impl AcquisitionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionStrategy::Random => "random",
            AcquisitionStrategy::LeastConfidence => "least_confidence",
            AcquisitionStrategy::Coreset => "coreset",
        }
    }
}

impl std::str::FromStr for AcquisitionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Random, Self::LeastConfidence, Self::Coreset]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown acquisition strategy {s:?}"))
    }
}

fn check_batch(batch: usize, available: usize) -> Result<(), SimError> {
    if batch > available {
        return Err(SimError::BatchTooLarge { batch, available });
    }
    Ok(())
}

/// Uniform sample without replacement, returned in sampling order.
pub fn acquire_random<R: Rng + ?Sized>(pool: &[DocId], batch: usize, rng: &mut R) -> Result<Vec<DocId>, SimError> {
    check_batch(batch, pool.len())?;
    Ok(index::sample(rng, pool.len(), batch).into_iter().map(|i| pool[i]).collect())
}

/// The `batch` ids whose most likely class has the lowest probability.
pub fn acquire_least_confidence(probs: &[(DocId, Vec<f64>)], batch: usize) -> Result<Vec<DocId>, SimError> {
    check_batch(batch, probs.len())?;
    let mut conf: Vec<(DocId, f64)> = probs
        .iter()
        .map(|(id, p)| (*id, p.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    conf.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(conf.into_iter().take(batch).map(|(id, _)| id).collect())
}

/// Greedy k-center: repeatedly take the candidate farthest from everything
/// labeled or already picked. With nothing labeled the first pick is the
/// lowest id, since every distance is infinite.
pub fn acquire_coreset(
    candidates: &[(DocId, &SparseVec)],
    labeled: &[&SparseVec],
    batch: usize,
) -> Result<Vec<DocId>, SimError> {
    check_batch(batch, candidates.len())?;
    use rayon::prelude::*;
    let mut nearest: Vec<f64> = candidates
        .par_iter()
        .map(|(_, x)| labeled.iter().map(|l| x.dist_sq(l)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut taken = vec![false; candidates.len()];
    let mut picked = Vec::with_capacity(batch);
    for _ in 0..batch {
        let mut best: Option<usize> = None;
        for i in (0..candidates.len()).filter(|&i| !taken[i]) {
            best = match best {
                None => Some(i),
                Some(b) => match nearest[i].total_cmp(&nearest[b]) {
                    Ordering::Greater => Some(i),
                    Ordering::Equal if candidates[i].0 < candidates[b].0 => Some(i),
                    _ => Some(b),
                },
            };
        }
        let b = best.expect("batch <= candidates");
        taken[b] = true;
        picked.push(candidates[b].0);
        let center = candidates[b].1;
        nearest
            .par_iter_mut()
            .zip(candidates.par_iter())
            .for_each(|(d, (_, x))| *d = d.min(x.dist_sq(center)));
    }
    Ok(picked)
}

/// Unweighted mean of per-class F1. A class with no predictions or no gold
/// instances contributes 0.
pub fn macro_f1(predictions: &[u32], gold: &[u32], classes: usize) -> Result<f64, SimError> {
    if predictions.len() != gold.len() || gold.is_empty() {
        return Err(SimError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if classes == 0 {
        return Err(SimError::InvalidConfig("macro-F1 needs at least one class".into()));
    }
    let (mut tp, mut fp, mut fn_) = (vec![0u64; classes], vec![0u64; classes], vec![0u64; classes]);
    for (&p, &g) in predictions.iter().zip(gold) {
        let (p, g) = (p as usize, g as usize);
        if p >= classes || g >= classes {
            return Err(SimError::InvalidConfig(format!("label out of range for {classes} classes")));
        }
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let total: f64 = (0..classes)
        .map(|c| {
            if tp[c] + fp[c] == 0 || tp[c] + fn_[c] == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64
            }
        })
        .sum();
    Ok(total / classes as f64)
}
