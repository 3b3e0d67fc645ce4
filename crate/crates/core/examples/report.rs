//! Aggregate, efficiency and tradeoff tables from hand-made metrics.
//!
//!     cargo run --example report

use activeprune::al_sim::IterationMetrics;
use activeprune::prune::PruneMode;
use activeprune::report::{self, RunRecord};

fn metrics(f1: &[f64], pruning_ms: u64, scorer_calls: usize) -> Vec<IterationMetrics> {
    f1.iter()
        .enumerate()
        .map(|(i, &f1_macro)| IterationMetrics {
            iteration: i as u64 + 1,
            f1_macro,
            labeled_count: 100 * (i + 1),
            pruning_ms,
            scoring_ms: pruning_ms / 2,
            acquisition_ms: 5,
            training_ms: 40,
            scorer_calls,
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let runs = vec![
        RunRecord { mode: PruneMode::ActivePrune, seed: 1, metrics: metrics(&[0.61, 0.70, 0.74], 30, 200) },
        RunRecord { mode: PruneMode::ActivePrune, seed: 2, metrics: metrics(&[0.59, 0.71, 0.75], 32, 200) },
        RunRecord { mode: PruneMode::QualityOnly, seed: 1, metrics: metrics(&[0.62, 0.71, 0.75], 900, 10_000) },
        RunRecord { mode: PruneMode::Random, seed: 1, metrics: metrics(&[0.55, 0.66, 0.72], 1, 0) },
    ];
    for r in report::aggregate(&runs) {
        println!("{:<13} it {}  F1 {:.3} ± {:.3}  ({} runs)", r.mode.name(), r.iteration, r.f1_macro_mean, r.f1_macro_sem, r.runs);
    }
    println!();
    for r in report::tradeoff(&runs) {
        println!("{r:?}");
    }
    let dir = tempfile::tempdir()?;
    report::write_csv(&dir.path().join("efficiency.csv"), &report::efficiency(&runs))?;
    print!("\n{}", std::fs::read_to_string(dir.path().join("efficiency.csv"))?);
    Ok(())
}
