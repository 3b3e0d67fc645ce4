//! Modified Kneser-Ney n-gram language model (orders 1 to 5) used for the
//! fast perplexity pass over the whole unlabeled pool.
//!
//! Probabilities and backoff weights are stored as log10 values, ARPA
//! style. Unigrams sit in a dense array indexed by token id. Every higher
//! order gets its own [`probing::ProbingTable`] keyed by n-gram fingerprint.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Dataset, DocId};
use crate::tokenizer::{TokenId, Vocabulary};

pub mod arpa;
pub mod binary;
pub mod probing;
pub mod train;

pub use train::{modified_kn_discounts, train, TrainStats};

pub const MAX_ORDER: usize = 5;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("order must be 1..5, got {0}")]
    InvalidOrder(usize),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("degenerate counts-of-counts {counts:?}")]
    DegenerateCounts { counts: [u64; 4] },
    #[error("malformed training sentence: {0}")]
    MalformedSentence(String),
    #[error("token id {0} is outside the vocabulary")]
    TokenOutOfRange(TokenId),
    #[error("ARPA format error on line {line}: {reason}")]
    ArpaFormat { line: usize, reason: String },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("fingerprint collision in the order-{order} table")]
    FingerprintCollision { order: usize },
    #[error("binary model: {0}")]
    BinaryFormat(String),
    #[error(transparent)]
    Tokenizer(#[from] crate::tokenizer::TokenizerError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// log10 probability and log10 backoff of one stored n-gram.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Weights {
    pub prob: f64,
    pub backoff: f64,
}

/// `(D1, D2, D3+)` for one order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discounts(pub [f64; 3]);

impl Discounts {
    #[inline]
    pub fn of(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.0[0],
            2 => self.0[1],
            _ => self.0[2],
        }
    }

    /// Total discounted mass `Σ D(c)` over a context's continuations.
    pub fn mass(&self, counts: &[u64]) -> f64 {
        counts.iter().map(|&c| self.of(c)).sum()
    }
}

#[derive(Debug, Clone)]
struct OrderTable {
    /// Flattened n-grams, `n` ids each, in insertion order.
    grams: Vec<TokenId>,
    table: probing::ProbingTable,
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    vocab_size: usize,
    unigrams: Vec<Weights>,
    /// Orders 2..=order.
    higher: Vec<OrderTable>,
    /// Per-order discounts; empty for models imported from ARPA.
    discounts: Vec<Discounts>,
}

/// Log-probability of one sentence and the number of scored positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceScore {
    pub log10_prob: f64,
    pub token_count: usize,
}

impl SentenceScore {
    pub fn perplexity(&self) -> f64 {
        10f64.powf(-self.log10_prob / self.token_count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityScore {
    pub doc_id: DocId,
    pub ppl: f64,
    pub token_count: usize,
}

impl NGramModel {
    /// Assemble a model from already-estimated weights.
    ///
    /// `higher[i]` holds order `i + 2` as `(flattened grams, weights)`.
    pub fn from_parts(
        order: usize,
        vocab_size: usize,
        unigrams: Vec<Weights>,
        higher: Vec<(Vec<TokenId>, Vec<Weights>)>,
        discounts: Vec<Discounts>,
    ) -> Result<Self, LmError> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(LmError::InvalidOrder(order));
        }
        assert_eq!(unigrams.len(), vocab_size);
        assert_eq!(higher.len(), order - 1);
        let mut tables = Vec::with_capacity(order - 1);
        for (i, (grams, weights)) in higher.into_iter().enumerate() {
            let n = i + 2;
            assert_eq!(grams.len(), weights.len() * n);
            let mut table = probing::ProbingTable::with_entries(weights.len());
            for (g, w) in grams.chunks_exact(n).zip(weights) {
                if let Some(&bad) = g.iter().find(|&&t| t as usize >= vocab_size) {
                    return Err(LmError::TokenOutOfRange(bad));
                }
                table
                    .insert(probing::fingerprint(g), w)
                    .map_err(|_| LmError::FingerprintCollision { order: n })?;
            }
            tables.push(OrderTable { grams, table });
        }
        Ok(NGramModel {
            order,
            vocab_size,
            unigrams,
            higher: tables,
            discounts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn discounts(&self) -> &[Discounts] {
        &self.discounts
    }

    /// Number of stored n-grams per order, unigrams first.
    pub fn counts(&self) -> Vec<usize> {
        std::iter::once(self.vocab_size)
            .chain(self.higher.iter().map(|t| t.table.len()))
            .collect()
    }

    pub fn unigram(&self, id: TokenId) -> Weights {
        self.unigrams[id as usize]
    }

    /// Stored weights of an explicit n-gram, if present.
    pub fn lookup(&self, gram: &[TokenId]) -> Option<Weights> {
        match gram.len() {
            0 => None,
            1 => self.unigrams.get(gram[0] as usize).copied(),
            n if n <= self.order => self.higher[n - 2]
                .table
                .get(probing::fingerprint(gram))
                .copied(),
            _ => None,
        }
    }

    /// Iterate stored n-grams of order `n >= 2` with their weights.
    pub fn entries(&self, n: usize) -> impl Iterator<Item = (&[TokenId], Weights)> + '_ {
        let t = &self.higher[n - 2];
        t.grams.chunks_exact(n).map(move |g| {
            let w = *t.table.get(probing::fingerprint(g)).expect("stored gram");
            (g, w)
        })
    }

    /// log10 P(word | context), using at most the last `order - 1` context ids.
    #[inline]
    pub fn log_prob(&self, context: &[TokenId], word: TokenId) -> f64 {
        let ctx = &context[context.len().saturating_sub(self.order - 1)..];
        let len = ctx.len();

        // Longest stored n-gram ending in `word`.
        let mut prob = self.unigrams[word as usize].prob;
        let mut matched = 0;
        let mut key = probing::start(word);
        for (j, &c) in ctx.iter().rev().enumerate() {
            key = probing::extend(key, c);
            match self.higher[j].table.get(key) {
                Some(w) => {
                    prob = w.prob;
                    matched = j + 1;
                }
                None => break,
            }
        }
        if matched == len {
            return prob;
        }

        // Back off through every context longer than the matched one.
        let mut ckey = probing::start(ctx[len - 1]);
        if matched == 0 {
            prob += self.unigrams[ctx[len - 1] as usize].backoff;
        }
        for j in 2..=len {
            ckey = probing::extend(ckey, ctx[len - j]);
            if j > matched {
                match self.higher[j - 2].table.get(ckey) {
                    Some(w) => prob += w.backoff,
                    None => break,
                }
            }
        }
        prob
    }

    /// Score a `<s>`-wrapped sentence. `<s>` is context only; `</s>` is scored.
    pub fn score_sentence(&self, tokens: &[TokenId]) -> SentenceScore {
        debug_assert!(tokens.len() >= 2);
        let span = self.order - 1;
        let log10_prob = (1..tokens.len())
            .map(|i| self.log_prob(&tokens[i.saturating_sub(span)..i], tokens[i]))
            .sum();
        SentenceScore {
            log10_prob,
            token_count: tokens.len() - 1,
        }
    }

    pub fn perplexity(&self, tokens: &[TokenId]) -> f64 {
        self.score_sentence(tokens).perplexity()
    }

    /// Perplexity of every document. Each score depends only on its own
    /// document, so the result does not depend on the worker count.
    pub fn score_pool(&self, docs: &Dataset, vocab: &Vocabulary) -> BTreeMap<DocId, PerplexityScore> {
        docs.documents()
            .par_iter()
            .map(|d| {
                let s = self.score_sentence(&vocab.tokenize(&d.text));
                (
                    d.id,
                    PerplexityScore {
                        doc_id: d.id,
                        ppl: s.perplexity(),
                        token_count: s.token_count,
                    },
                )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
}

/// Tokenize a line-per-sentence corpus, build the vocabulary and train.
pub fn train_from_text<S: AsRef<str> + Sync>(
    lines: &[S],
    order: usize,
    min_count: u32,
) -> Result<(NGramModel, Vocabulary, TrainStats), LmError> {
    let vocab = Vocabulary::build(lines.iter().map(|l| l.as_ref()), min_count)?;
    let sentences: Vec<Vec<TokenId>> = lines
        .par_iter()
        .map(|l| vocab.tokenize(l.as_ref()))
        .collect();
    let (model, stats) = train(&sentences, order, vocab.len())?;
    Ok((model, vocab, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_unigram(v: usize) -> NGramModel {
        let w = Weights {
            prob: -(v as f64).log10(),
            backoff: 0.0,
        };
        NGramModel::from_parts(1, v, vec![w; v], vec![], vec![]).unwrap()
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let m = uniform_unigram(8);
        let ppl = m.perplexity(&[1, 3, 4, 5, 6, 2]);
        assert!((ppl - 8.0).abs() < 1e-12, "{ppl}");
    }

    #[test]
    fn single_position_with_p_tenth() {
        let mut w = vec![Weights::default(); 4];
        w[2].prob = -1.0;
        let m = NGramModel::from_parts(1, 4, w, vec![], vec![]).unwrap();
        assert!((m.perplexity(&[1, 2]) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_context_is_unigram() {
        let (m, v, _) = train_from_text(&["a b c", "a c"], 3, 1).unwrap();
        let a = v.id("a").unwrap();
        assert_eq!(m.log_prob(&[], a), m.unigram(a).prob);
    }

    #[test]
    fn backoff_applies_when_ngram_unseen() {
        let (m, v, _) = train_from_text(&["a b", "a c", "b c"], 2, 1).unwrap();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        // "b a" never occurs, "b" is an observed context.
        assert!(m.lookup(&[b, a]).is_none());
        let expect = m.unigram(b).backoff + m.unigram(a).prob;
        assert_eq!(m.log_prob(&[b], a), expect);
    }

    #[test]
    fn queries_are_pure() {
        let (m, v, _) = train_from_text(&["x y z", "y z x", "z"], 4, 1).unwrap();
        let t = v.tokenize("x y z x y");
        let a = m.score_sentence(&t);
        let b = m.score_sentence(&t);
        assert_eq!(a.log10_prob.to_bits(), b.log10_prob.to_bits());
        assert_eq!(a.token_count, 6);
    }
}
