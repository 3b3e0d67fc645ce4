//! Interpolated modified Kneser-Ney estimation.
//!
//! Counting is sort-based: every order collects fixed-width windows, sorts
//! them and run-length encodes the result. Below the top order an n-gram's
//! adjusted count is its number of distinct left extensions, except for
//! n-grams starting at `<s>`, which cannot be extended and keep raw counts.

use std::cmp::Ordering;

use super::{Discounts, LmError, NGramModel, Weights, MAX_ORDER};
use crate::tokenizer::{TokenId, Vocabulary};

/// Discount used at an order whose counts-of-counts are degenerate.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

type Key = [TokenId; MAX_ORDER];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub sentences: usize,
    /// Scored tokens (everything after `<s>`).
    pub tokens: usize,
    /// Distinct n-grams per order, index 0 = unigrams.
    pub ngrams: Vec<usize>,
    /// Counts-of-counts `[n1, n2, n3, n4]` per order.
    pub counts_of_counts: Vec<[u64; 4]>,
    /// Orders (1-based) that fell back to [`FALLBACK_DISCOUNT`].
    pub fallback_orders: Vec<usize>,
}

/// `D_k = k - (k+1) Y n_{k+1} / n_k` with `Y = n1 / (n1 + 2 n2)`, for k = 1, 2, 3+.
pub fn modified_kn_discounts(coc: [u64; 4]) -> Result<Discounts, LmError> {
    let [n1, n2, n3, n4] = coc.map(|c| c as f64);
    if n1 == 0.0 || n2 == 0.0 || n3 == 0.0 {
        return Err(LmError::DegenerateCounts { counts: coc });
    }
    let y = n1 / (n1 + 2.0 * n2);
    let d = [1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2, 3.0 - 4.0 * y * n4 / n3];
    for (k, &dk) in d.iter().enumerate() {
        if !(dk > 0.0 && dk <= (k + 1) as f64) {
            return Err(LmError::DegenerateCounts { counts: coc });
        }
    }
    Ok(Discounts(d))
}

struct OrderCounts {
    /// Sorted distinct n-grams (first `n` slots of each key used).
    grams: Vec<Key>,
    /// Adjusted counts, parallel to `grams`.
    counts: Vec<u64>,
}

fn cmp_prefix(a: &Key, b: &Key, n: usize) -> Ordering {
    a[..n].cmp(&b[..n])
}

fn run_length(mut keys: Vec<Key>) -> (Vec<Key>, Vec<u64>) {
    keys.sort_unstable();
    let mut grams: Vec<Key> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for k in keys {
        match grams.last() {
            Some(last) if *last == k => *counts.last_mut().unwrap() += 1,
            _ => {
                grams.push(k);
                counts.push(1);
            }
        }
    }
    (grams, counts)
}

fn validate_sentence(s: &[TokenId], vocab_size: usize) -> Result<(), LmError> {
    if s.len() < 2 || s[0] != Vocabulary::BOS_ID {
        return Err(LmError::MalformedSentence(
            "sentence must start with <s> and score at least one token".into(),
        ));
    }
    if s[1..].contains(&Vocabulary::BOS_ID) {
        return Err(LmError::MalformedSentence("<s> may only open a sentence".into()));
    }
    if let Some(&bad) = s.iter().find(|&&t| t as usize >= vocab_size) {
        return Err(LmError::TokenOutOfRange(bad));
    }
    Ok(())
}

fn count(sentences: &[Vec<TokenId>], order: usize) -> Vec<OrderCounts> {
    let mut out: Vec<OrderCounts> = Vec::with_capacity(order);
    // Top order first: lower orders derive continuation counts from the order above.
    let mut above: Option<Vec<Key>> = None;
    for n in (1..=order).rev() {
        let mut windows = Vec::new();
        for s in sentences {
            // Windows end at a scored position, never at the leading <s>.
            for end in n.max(2)..=s.len() {
                let start = end - n;
                let mut key = [0; MAX_ORDER];
                key[..n].copy_from_slice(&s[start..end]);
                windows.push(key);
            }
        }
        let (grams, raw) = run_length(windows);
        let counts = match &above {
            None => raw,
            Some(upper) => {
                // Distinct left extensions: suffixes of the distinct (n+1)-grams.
                let mut suffixes: Vec<Key> = upper
                    .iter()
                    .map(|k| {
                        let mut s = [0; MAX_ORDER];
                        s[..n].copy_from_slice(&k[1..=n]);
                        s
                    })
                    .collect();
                suffixes.sort_unstable();
                let mut cont = Vec::with_capacity(grams.len());
                let mut j = 0;
                for (g, &r) in grams.iter().zip(&raw) {
                    while j < suffixes.len() && suffixes[j] < *g {
                        j += 1;
                    }
                    let mut c = 0u64;
                    while j < suffixes.len() && suffixes[j] == *g {
                        c += 1;
                        j += 1;
                    }
                    cont.push(if g[0] == Vocabulary::BOS_ID { r } else { c });
                }
                cont
            }
        };
        above = Some(grams.clone());
        out.push(OrderCounts { grams, counts });
    }
    out.reverse();
    out
}

fn counts_of_counts(counts: &[u64]) -> [u64; 4] {
    let mut coc = [0u64; 4];
    for &c in counts {
        if (1..=4).contains(&c) {
            coc[c as usize - 1] += 1;
        }
    }
    coc
}

/// Estimate an interpolated modified Kneser-Ney model of the given order.
///
/// Every sentence must be a `tokenize` output: `<s>` first and only there.
pub fn train(
    sentences: &[Vec<TokenId>],
    order: usize,
    vocab_size: usize,
) -> Result<(NGramModel, TrainStats), LmError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::InvalidOrder(order));
    }
    if sentences.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    for s in sentences {
        validate_sentence(s, vocab_size)?;
    }

    let levels = count(sentences, order);
    let mut stats = TrainStats {
        sentences: sentences.len(),
        tokens: sentences.iter().map(|s| s.len() - 1).sum(),
        ..Default::default()
    };

    let mut discounts = Vec::with_capacity(order);
    for (i, level) in levels.iter().enumerate() {
        let coc = counts_of_counts(&level.counts);
        stats.ngrams.push(level.grams.len());
        stats.counts_of_counts.push(coc);
        discounts.push(modified_kn_discounts(coc).unwrap_or_else(|_| {
            stats.fallback_orders.push(i + 1);
            Discounts([FALLBACK_DISCOUNT; 3])
        }));
    }

    // Linear-domain probabilities and gammas, per order, parallel to grams.
    let mut probs: Vec<Vec<f64>> = Vec::with_capacity(order);
    let mut backoffs: Vec<Vec<f64>> = levels.iter().map(|l| vec![1.0; l.grams.len()]).collect();
    let mut unigram_gamma = vec![1.0; vocab_size];

    // Unigrams interpolate with the uniform distribution over the whole vocabulary.
    let uni = &levels[0];
    let d = discounts[0];
    let total: u64 = uni.counts.iter().sum();
    let gamma0 = d.mass(&uni.counts) / total as f64;
    let uniform = 1.0 / vocab_size as f64;
    let mut unigram = vec![gamma0 * uniform; vocab_size];
    for (g, &c) in uni.grams.iter().zip(&uni.counts) {
        unigram[g[0] as usize] += (c as f64 - d.of(c)) / total as f64;
    }
    probs.push(uni.grams.iter().map(|g| unigram[g[0] as usize]).collect());

    for n in 2..=order {
        let level = &levels[n - 1];
        let lower = &levels[n - 2];
        let d = discounts[n - 1];
        let mut p = vec![0.0; level.grams.len()];
        let mut i = 0;
        while i < level.grams.len() {
            let mut j = i;
            while j < level.grams.len()
                && cmp_prefix(&level.grams[j], &level.grams[i], n - 1) == Ordering::Equal
            {
                j += 1;
            }
            let group = &level.counts[i..j];
            let total: u64 = group.iter().sum();
            let gamma = d.mass(group) / total as f64;
            for (k, g) in level.grams.iter().enumerate().take(j).skip(i) {
                let mut suffix = [0; MAX_ORDER];
                suffix[..n - 1].copy_from_slice(&g[1..n]);
                let lower_p = if n == 2 {
                    unigram[g[1] as usize]
                } else {
                    let pos = lower
                        .grams
                        .binary_search(&suffix)
                        .expect("suffix of an observed n-gram is observed");
                    probs[n - 2][pos]
                };
                let c = level.counts[k];
                p[k] = (c as f64 - d.of(c)) / total as f64 + gamma * lower_p;
            }
            // Attach gamma to the context, an (n-1)-gram.
            let mut ctx = [0; MAX_ORDER];
            ctx[..n - 1].copy_from_slice(&level.grams[i][..n - 1]);
            if n == 2 {
                unigram_gamma[ctx[0] as usize] = gamma;
            } else {
                let pos = lower
                    .grams
                    .binary_search(&ctx)
                    .expect("context of an observed n-gram is observed");
                backoffs[n - 2][pos] = gamma;
            }
            i = j;
        }
        probs.push(p);
    }

    let unigram_weights: Vec<Weights> = unigram
        .iter()
        .zip(&unigram_gamma)
        .map(|(&p, &g)| Weights {
            prob: p.log10(),
            backoff: g.log10(),
        })
        .collect();

    let mut higher = Vec::with_capacity(order.saturating_sub(1));
    for n in 2..=order {
        let level = &levels[n - 1];
        let mut flat = Vec::with_capacity(level.grams.len() * n);
        let mut weights = Vec::with_capacity(level.grams.len());
        for (k, g) in level.grams.iter().enumerate() {
            flat.extend_from_slice(&g[..n]);
            weights.push(Weights {
                prob: probs[n - 1][k].log10(),
                backoff: if n < order { backoffs[n - 1][k].log10() } else { 0.0 },
            });
        }
        higher.push((flat, weights));
    }

    let model = NGramModel::from_parts(order, vocab_size, unigram_weights, higher, discounts)?;
    Ok((model, stats))
}
