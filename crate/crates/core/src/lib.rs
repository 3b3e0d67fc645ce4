//! Two-stage pruning of the unlabeled pool for pool-based active learning.
//!
//! The pipeline scores every unlabeled document with a modified Kneser-Ney
//! n-gram model ([`ngram`]), keeps the lowest-perplexity share of the pool,
//! rescores a bounded number of high-perplexity candidates with an LLM
//! quality scorer ([`quality`]) and hands the union to an acquisition
//! strategy ([`al_sim`]). After every labeling round the perplexity map is
//! reweighted against the freshly labeled batch ([`prune::reweight`]).
//!
//! Runnable walkthroughs for each stage live in `examples/`.

pub mod al_sim;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod ngram;
pub mod prune;
pub mod quality;
pub mod report;
pub mod seed;
pub mod synth;
pub mod tokenizer;

pub use corpus::{Dataset, Document, RunState};
pub use error::{Error, Result};
pub use ngram::{NGramModel, PerplexityScore};
pub use prune::{FilteredPool, PruneConfig, PruneMode};
pub use quality::{QualityScore, Scorer, ScorerBudget, TaskType};
pub use tokenizer::Vocabulary;
