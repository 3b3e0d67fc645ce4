//! A complete simulated active-learning run for three pruning modes, with
//! metrics written to CSV and summarized per mode.
//!
//!     cargo run --release --example active_learning

use std::collections::BTreeMap;
use std::sync::Arc;

use activeprune::al_sim::{run_active_learning, write_metrics_csv, AcquisitionStrategy, RunOptions, SimConfig, SimInputs};
use activeprune::corpus::DocId;
use activeprune::ngram::train_from_text;
use activeprune::prune::{PruneConfig, PruneMode};
use activeprune::quality::{MockScorer, ScoringOptions, TaskType};
use activeprune::report::{self, RunRecord};
use activeprune::synth::{self, SynthConfig};

fn main() -> anyhow::Result<()> {
    let (model, vocab, _) = train_from_text(&synth::reference_corpus(3000, 1), 5, 1)?;
    let vocab = Arc::new(vocab);
    let (train, noise) = synth::generate("train", &SynthConfig { docs: 10_000, noise_fraction: 0.1, seed: 5, ..SynthConfig::default() });
    let (test, _) = synth::generate("test", &SynthConfig { docs: 1000, seed: 6, first_id: 1_000_000, ..SynthConfig::default() });
    let ppl: BTreeMap<DocId, f64> = model.score_pool(&train, &vocab).into_iter().map(|(id, s)| (id, s.ppl)).collect();
    let scorer = MockScorer::new(vocab.clone());
    let inputs = SimInputs {
        train: &train,
        test: &test,
        vocab: &vocab,
        perplexity: &ppl,
        scorer: &scorer,
        task: TaskType::Sentiment,
        scoring: ScoringOptions { parallelism: 4, ..ScoringOptions::default() },
    };
    let sim = SimConfig { strategy: AcquisitionStrategy::LeastConfidence, ..SimConfig::default() };
    let out = tempfile::tempdir()?;

    let mut runs = Vec::new();
    for mode in [PruneMode::ActivePrune, PruneMode::PerplexityOnly, PruneMode::Random] {
        let cfg = PruneConfig { mode, m: Some(2000), ..PruneConfig::default() };
        for seed in 1..=2 {
            let outcome = run_active_learning(&inputs, &cfg, &sim, seed, &RunOptions::default())?;
            let noisy = outcome.state.labeled_ids.intersection(&noise).count();
            let f1: Vec<String> = outcome.metrics.iter().map(|m| format!("{:.3}", m.f1_macro)).collect();
            println!("{:<16} seed {seed}: F1 {} | {noisy} noise docs labeled", mode.name(), f1.join(" "));
            write_metrics_csv(&out.path().join(format!("{}_{seed}.csv", mode.name())), &outcome.metrics)?;
            runs.push(RunRecord { mode, seed, metrics: outcome.metrics });
        }
    }
    println!();
    for row in report::aggregate(&runs).iter().filter(|r| r.iteration == sim.iterations as u64) {
        println!("{:<16} final F1 {:.4} ± {:.4}", row.mode.name(), row.f1_macro_mean, row.f1_macro_sem);
    }
    Ok(())
}
