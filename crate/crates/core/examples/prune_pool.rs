//! One pruning round in every mode, with the per-stage report.
//!
//!     cargo run --example prune_pool

use std::collections::BTreeMap;
use std::sync::Arc;

use activeprune::corpus::{DocId, RunState};
use activeprune::ngram::train_from_text;
use activeprune::prune::{PruneConfig, PruneMode, Pruner};
use activeprune::quality::{CountingScorer, MockScorer, ScoringOptions, TaskType};
use activeprune::synth::{self, SynthConfig};

fn main() -> anyhow::Result<()> {
    let (model, vocab, _) = train_from_text(&synth::reference_corpus(3000, 1), 5, 1)?;
    let vocab = Arc::new(vocab);
    let (pool, noise) = synth::generate("pool", &SynthConfig { docs: 8000, noise_fraction: 0.1, seed: 3, ..SynthConfig::default() });
    let ppl: BTreeMap<DocId, f64> = model.score_pool(&pool, &vocab).into_iter().map(|(id, s)| (id, s.ppl)).collect();
    let state = RunState::new(ppl, 3);
    let scorer = CountingScorer::new(MockScorer::new(vocab));

    println!("{:<16} {:>6} {:>6} {:>6} {:>7} {:>6}", "mode", "kept", "ppl", "qual", "calls", "noise");
    for mode in PruneMode::ALL {
        // m is raised above its default so the candidates reach past the
        // 800 noise documents at the top of the perplexity ranking.
        let cfg = PruneConfig { mode, m: Some(1600), seed: 3, ..PruneConfig::default() };
        let mut pruner = Pruner::new(cfg, TaskType::Sentiment, ScoringOptions { parallelism: 4, ..ScoringOptions::default() })?;
        scorer.reset();
        let (filtered, report) = pruner.prune(&state, &pool, &scorer)?;
        let noisy = filtered.ids.intersection(&noise).count();
        println!(
            "{:<16} {:>6} {:>6} {:>6} {:>7} {:>6}",
            mode.name(),
            report.kept,
            report.from_perplexity,
            report.from_quality,
            scorer.calls(),
            noisy
        );
    }
    Ok(())
}
