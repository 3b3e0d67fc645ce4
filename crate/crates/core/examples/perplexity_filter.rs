//! Stage one on its own: score a noisy pool and keep the lowest-perplexity
//! quarter.
//!
//!     cargo run --example perplexity_filter

use std::collections::BTreeMap;

use activeprune::corpus::DocId;
use activeprune::ngram::train_from_text;
use activeprune::prune::select_bottom_k_perplexity;
use activeprune::synth::{self, SynthConfig};

fn main() -> anyhow::Result<()> {
    let (model, vocab, _) = train_from_text(&synth::reference_corpus(3000, 1), 5, 1)?;
    let cfg = SynthConfig { docs: 10_000, noise_fraction: 0.1, seed: 2, ..SynthConfig::default() };
    let (pool, noise) = synth::generate("pool", &cfg);

    let ppl: BTreeMap<DocId, f64> = model.score_pool(&pool, &vocab).into_iter().map(|(id, s)| (id, s.ppl)).collect();
    let kept = select_bottom_k_perplexity(&ppl, 2500)?;
    let noisy_kept = kept.iter().filter(|id| noise.contains(id)).count();
    println!("kept {} of {}; {noisy_kept} of {} noise documents survive", kept.len(), pool.len(), noise.len());

    for &id in kept.iter().take(3).chain(kept.iter().rev().take(1)) {
        println!("{:>8.2}  {}", ppl[&id], pool.get(id).unwrap().text);
    }
    let worst = ppl.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    println!("highest: {:.2}  {}", worst.1, pool.get(*worst.0).unwrap().text);
    Ok(())
}
