//! Synthetic two-class review corpora with injected noise.
//!
//! Clean documents come from a small phrase grammar whose adjectives carry
//! the label (with some cross-class leakage so the task is not trivial).
//! Noise documents are word salad: grammar words in random order mixed with
//! symbol-laden junk tokens, which makes them the highest-perplexity items
//! in any pool.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Dataset, DocId, Document};
use crate::seed::{self, Stream};

const SUBJECTS: &[&str] = &[
    "the movie", "this film", "the story", "the acting", "the plot", "the ending", "the cast", "the music",
    "the script", "the director", "the soundtrack", "the dialogue", "the pacing", "the camera work", "the hero",
    "the villain", "this sequel", "the show", "the book", "the series",
];
const VERBS: &[&str] = &["was", "felt", "seemed", "is", "looked", "turned out", "became", "remained"];
const ADVERBS: &[&str] = &["really", "quite", "very", "rather", "truly", "somewhat", "so", "often", "mostly"];
const CONNECTIVES: &[&str] = &["and", "but", "while", "because", "although", "so", "yet", "since"];
const POSITIVE: &[&str] = &[
    "great", "wonderful", "brilliant", "moving", "delightful", "charming", "superb", "clever", "beautiful",
    "gripping", "fresh", "funny", "touching", "stunning", "excellent", "enjoyable",
];
const NEGATIVE: &[&str] = &[
    "awful", "boring", "dull", "clumsy", "tedious", "bland", "terrible", "weak", "messy", "forgettable",
    "painful", "silly", "flat", "annoying", "lifeless", "poor",
];
const CLOSERS: &[&str] = &[
    "i would watch it again",
    "i left early",
    "my friends agreed",
    "the audience laughed",
    "nobody expected that",
    "it was worth the ticket",
    "i want my money back",
    "we talked about it for days",
];
const NOISE_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789#$%&*@!?~^|<>{}[]=+_";

/// Probability that an adjective is drawn from the other class.
pub const LEAKAGE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub docs: usize,
    pub noise_fraction: f64,
    pub seed: u64,
    /// Label leakage; see [`LEAKAGE`].
    pub leakage: f64,
    /// First document id; ids are consecutive.
    pub first_id: DocId,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 1000,
            noise_fraction: 0.0,
            seed: 0,
            leakage: LEAKAGE,
            first_id: 0,
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty word list")
}

/// One clean sentence. `label` picks the adjective list.
pub fn clean_sentence<R: Rng>(rng: &mut R, label: u32, leakage: f64) -> String {
    let adjective = |rng: &mut R| {
        let positive = (label == 1) != rng.gen_bool(leakage);
        pick(rng, if positive { POSITIVE } else { NEGATIVE })
    };
    let mut s = format!("{} {} ", pick(rng, SUBJECTS), pick(rng, VERBS));
    if rng.gen_bool(0.5) {
        s.push_str(pick(rng, ADVERBS));
        s.push(' ');
    }
    s.push_str(adjective(rng));
    if rng.gen_bool(0.6) {
        let c = pick(rng, CONNECTIVES);
        let a = adjective(rng);
        s.push_str(&format!(" {c} {} {} {a}", pick(rng, SUBJECTS), pick(rng, VERBS)));
    }
    if rng.gen_bool(0.3) {
        s.push_str(" and ");
        s.push_str(pick(rng, CLOSERS));
    }
    s
}

/// 6 to 14 tokens, each either a grammar word in random order or a short
/// symbol-laden string. The real words give noise documents features that
/// overlap with clean text, so their random labels act as label noise.
pub fn noise_text<R: Rng>(rng: &mut R) -> String {
    let words = rng.gen_range(6..=14);
    (0..words)
        .map(|_| {
            if rng.gen_bool(0.5) {
                let list = *[SUBJECTS, VERBS, ADVERBS, CONNECTIVES, POSITIVE, NEGATIVE].choose(rng).unwrap();
                let phrase = pick(rng, list);
                phrase.rsplit(' ').next().unwrap().to_string()
            } else {
                let len = rng.gen_range(2..=7);
                (0..len)
                    .map(|_| *NOISE_CHARS.choose(rng).unwrap() as char)
                    .collect::<String>()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Balanced labeled dataset plus the ids of the injected noise documents.
/// Noise documents carry a random label, like mislabeled scraped data.
pub fn generate(name: &str, cfg: &SynthConfig) -> (Dataset, BTreeSet<DocId>) {
    let mut rng = seed::rng(cfg.seed, 0, Stream::Synth);
    let n_noise = (cfg.noise_fraction * cfg.docs as f64).round() as usize;
    let mut is_noise: Vec<bool> = (0..cfg.docs).map(|i| i < n_noise).collect();
    is_noise.shuffle(&mut rng);

    let mut noise = BTreeSet::new();
    let docs = is_noise
        .into_iter()
        .enumerate()
        .map(|(i, noisy)| {
            let id = cfg.first_id + i as DocId;
            let label = (i % 2) as u32;
            let text = if noisy {
                noise.insert(id);
                noise_text(&mut rng)
            } else {
                clean_sentence(&mut rng, label, cfg.leakage)
            };
            let label = if noisy { rng.gen_range(0..2) } else { label };
            Document::new(id, text, Some(label))
        })
        .collect();
    let names = vec!["negative".to_string(), "positive".to_string()];
    let ds = Dataset::new(name, docs, Some(names)).expect("generated dataset is valid");
    (ds, noise)
}

/// Unlabeled clean sentences for training the reference language model.
pub fn reference_corpus(sentences: usize, seed: u64) -> Vec<String> {
    let mut rng = seed::rng(seed, 1, Stream::Synth);
    (0..sentences)
        .map(|i| clean_sentence(&mut rng, (i % 2) as u32, LEAKAGE))
        .collect()
}

/// Roughly `tokens` word tokens of clean text, for throughput work.
pub fn corpus_of_tokens(tokens: usize, seed: u64) -> Vec<String> {
    let mut rng = seed::rng(seed, 2, Stream::Synth);
    let mut out = Vec::new();
    let mut total = 0;
    while total < tokens {
        let label = rng.gen_range(0..2);
        let s = clean_sentence(&mut rng, label, LEAKAGE);
        total += s.split_whitespace().count();
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_noise_count() {
        let cfg = SynthConfig {
            docs: 200,
            noise_fraction: 0.1,
            seed: 7,
            ..SynthConfig::default()
        };
        let (a, na) = generate("a", &cfg);
        let (b, nb) = generate("a", &cfg);
        assert_eq!(a.documents(), b.documents());
        assert_eq!(na, nb);
        assert_eq!(na.len(), 20);
        assert_eq!(a.len(), 200);
    }

    #[test]
    fn clean_sentences_use_grammar_words() {
        let mut rng = seed::rng(1, 0, Stream::Synth);
        let s = clean_sentence(&mut rng, 1, 0.0);
        assert!(POSITIVE.iter().any(|w| s.contains(w)), "{s}");
        assert!(!NEGATIVE.iter().any(|w| s.split(' ').any(|t| t == *w)), "{s}");
    }
}
