use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError, TaskType};
use crate::corpus::Document;
use crate::tokenizer::{split_words, Vocabulary};

const CLEAN_WEIGHT: f64 = 4.0;
const NOISE_WEIGHT: f64 = 6.0;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `σ(4·clean − 6·noise)`, where `clean` is the share of in-vocabulary word
/// tokens and `noise` the share of non-whitespace characters that are not
/// alphanumeric. The task does not enter the heuristic.
pub fn mock_score(doc: &Document, _task: &TaskType, vocab: &Vocabulary) -> f64 {
    let words = split_words(&doc.text);
    let clean = if words.is_empty() {
        0.0
    } else {
        words.iter().filter(|w| vocab.id(w).is_some()).count() as f64 / words.len() as f64
    };
    let (mut visible, mut symbols) = (0usize, 0usize);
    for c in doc.text.chars().filter(|c| !c.is_whitespace()) {
        visible += 1;
        if !c.is_alphanumeric() {
            symbols += 1;
        }
    }
    let noise = if visible == 0 {
        0.0
    } else {
        symbols as f64 / visible as f64
    };
    sigmoid(CLEAN_WEIGHT * clean - NOISE_WEIGHT * noise)
}

/// Deterministic local scorer backed by [`mock_score`].
#[derive(Debug, Clone)]
pub struct MockScorer {
    vocab: Arc<Vocabulary>,
}

impl MockScorer {
    pub fn new(vocab: Arc<Vocabulary>) -> Self {
        MockScorer { vocab }
    }
}

impl Scorer for MockScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        Ok(ScoreResponse::Q(mock_score(request.doc, request.task, &self.vocab)))
    }
}

/// Wraps a scorer and counts every call that reaches it, retries included.
#[derive(Debug)]
pub struct CountingScorer<S> {
    inner: S,
    calls: AtomicUsize,
}

impl<S> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        CountingScorer {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) -> usize {
        self.calls.swap(0, Ordering::SeqCst)
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_text_scores_sigmoid_four() {
        let v = Vocabulary::build(["the cat sat"], 1).unwrap();
        let d = Document::new(1, "the cat sat", None);
        let q = mock_score(&d, &TaskType::Sentiment, &v);
        assert!((q - sigmoid(4.0)).abs() < 1e-15);
        assert!((q - 0.982).abs() < 1e-3);
    }

    #[test]
    fn pure_symbols_score_sigmoid_minus_six() {
        let v = Vocabulary::build(["the cat sat"], 1).unwrap();
        let d = Document::new(1, "#$% &*!", None);
        let q = mock_score(&d, &TaskType::Sentiment, &v);
        assert!((q - sigmoid(-6.0)).abs() < 1e-15);
        assert!((q - 0.0025).abs() < 1e-4);
        assert_eq!(q, mock_score(&d, &TaskType::Sentiment, &v));
    }
}
