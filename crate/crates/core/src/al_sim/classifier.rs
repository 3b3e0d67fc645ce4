//! Multinomial logistic regression over hashed sparse features.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::SparseVec;
use super::SimError;
use crate::seed::{self, Stream};

/// One training example: features and gold class.
pub type Example<'a> = (&'a SparseVec, u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    classes: usize,
    dim: usize,
    /// Row-major `classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    /// Mini-batch size; anything at least the example count is full-batch
    /// gradient descent.
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 50,
            lr: 1.0,
            l2: 1e-4,
            batch_size: 16,
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl LinearModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearModel {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn from_parts(classes: usize, dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, SimError> {
        if weights.len() != classes * dim || bias.len() != classes {
            return Err(SimError::DimMismatch {
                expected: classes * dim,
                got: weights.len(),
            });
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(SimError::InvalidConfig("model weights must be finite".into()));
        }
        Ok(LinearModel {
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn check(&self, x: &SparseVec) -> Result<(), SimError> {
        if x.dim != self.dim {
            return Err(SimError::DimMismatch {
                expected: self.dim,
                got: x.dim,
            });
        }
        Ok(())
    }

    fn logits_unchecked(&self, x: &SparseVec) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.dim..(c + 1) * self.dim];
                self.bias[c] + x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn logits(&self, x: &SparseVec) -> Result<Vec<f64>, SimError> {
        self.check(x)?;
        Ok(self.logits_unchecked(x))
    }

    pub fn predict_proba(&self, x: &SparseVec) -> Result<Vec<f64>, SimError> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Most probable class; the lowest class id wins a tie.
    pub fn predict(&self, x: &SparseVec) -> Result<u32, SimError> {
        let z = self.logits(x)?;
        let mut best = 0;
        for c in 1..z.len() {
            if z[c] > z[best] {
                best = c;
            }
        }
        Ok(best as u32)
    }
}

/// Mean cross-entropy plus `l2 / 2 * |W|^2` (bias unregularized).
pub fn loss(model: &LinearModel, examples: &[Example<'_>], l2: f64) -> f64 {
    let ce: f64 = examples
        .iter()
        .map(|&(x, y)| {
            let z = model.logits_unchecked(x);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - z[y as usize]
        })
        .sum();
    let reg: f64 = model.weights.iter().map(|w| w * w).sum();
    ce / examples.len() as f64 + 0.5 * l2 * reg
}

/// Gradient of [`loss`], returned in model shape.
pub fn gradient(model: &LinearModel, examples: &[Example<'_>], l2: f64) -> LinearModel {
    let mut g = LinearModel::zeros(model.classes, model.dim);
    accumulate(model, examples, &mut g);
    for (gw, w) in g.weights.iter_mut().zip(&model.weights) {
        *gw += l2 * w;
    }
    g
}

/// Add the mean cross-entropy gradient over `batch` to `g`.
fn accumulate(model: &LinearModel, batch: &[Example<'_>], g: &mut LinearModel) {
    let scale = 1.0 / batch.len() as f64;
    for &(x, y) in batch {
        let p = softmax(&model.logits_unchecked(x));
        for (c, pc) in p.into_iter().enumerate() {
            let r = (pc - if c == y as usize { 1.0 } else { 0.0 }) * scale;
            g.bias[c] += r;
            let row = &mut g.weights[c * model.dim..(c + 1) * model.dim];
            for (j, v) in x.iter() {
                row[j] += r * v;
            }
        }
    }
}

/// Train from zero weights with mini-batch gradient descent. Batches are
/// drawn from a per-epoch shuffle seeded by `seed`.
pub fn train_classifier(
    examples: &[Example<'_>],
    classes: usize,
    params: &TrainParams,
    seed: u64,
) -> Result<LinearModel, SimError> {
    if classes < 2 {
        return Err(SimError::InvalidConfig(format!("need at least 2 classes, got {classes}")));
    }
    let dim = examples.first().map_or(0, |(x, _)| x.dim);
    let mut seen = vec![false; classes];
    for &(x, y) in examples {
        if x.dim != dim {
            return Err(SimError::DimMismatch { expected: dim, got: x.dim });
        }
        *seen.get_mut(y as usize).ok_or(SimError::MissingClass(y))? = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(SimError::MissingClass(c as u32));
    }

    let mut model = LinearModel::zeros(classes, dim);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let batch_size = params.batch_size.max(1);
    for epoch in 0..params.epochs {
        if batch_size < examples.len() {
            order.shuffle(&mut seed::rng(seed, epoch as u64, Stream::Train));
        }
        for chunk in order.chunks(batch_size) {
            let batch: Vec<Example<'_>> = chunk.iter().map(|&i| examples[i]).collect();
            let mut g = LinearModel::zeros(classes, dim);
            accumulate(&model, &batch, &mut g);
            let decay = 1.0 - params.lr * params.l2;
            for (w, gw) in model.weights.iter_mut().zip(&g.weights) {
                *w = *w * decay - params.lr * gw;
            }
            for (b, gb) in model.bias.iter_mut().zip(&g.bias) {
                *b -= params.lr * gb;
            }
        }
    }
    Ok(model)
}
