//! The three acquisition strategies on a small hashed-feature pool.
//!
//!     cargo run --example acquisition

use std::sync::Arc;

use activeprune::al_sim::{
    acquire_coreset, acquire_least_confidence, acquire_random, train_classifier, FeatureHasher, SparseVec, TrainParams,
};
use activeprune::corpus::DocId;
use activeprune::seed::{self, Stream};
use activeprune::synth::{self, SynthConfig};
use activeprune::tokenizer::Vocabulary;

fn main() -> anyhow::Result<()> {
    let (ds, _) = synth::generate("pool", &SynthConfig { docs: 300, seed: 4, ..SynthConfig::default() });
    let vocab = Arc::new(Vocabulary::build(ds.documents().iter().map(|d| d.text.as_str()), 1)?);
    let hasher = FeatureHasher::new(1 << 12)?;
    let feats: Vec<SparseVec> = ds.documents().iter().map(|d| hasher.featurize(d, &vocab)).collect();
    let ids: Vec<DocId> = ds.ids().collect();

    // A small seed set to train on.
    let seed_set: Vec<usize> = (0..20).collect();
    let examples: Vec<(&SparseVec, u32)> = seed_set.iter().map(|&i| (&feats[i], ds.documents()[i].label.unwrap())).collect();
    let model = train_classifier(&examples, 2, &TrainParams::default(), 1)?;

    let pool: Vec<usize> = (20..ds.len()).collect();
    let pool_ids: Vec<DocId> = pool.iter().map(|&i| ids[i]).collect();
    let mut rng = seed::rng(1, 0, Stream::Acquire);
    println!("random:           {:?}", acquire_random(&pool_ids, 5, &mut rng)?);

    let probs: Vec<(DocId, Vec<f64>)> = pool.iter().map(|&i| Ok((ids[i], model.predict_proba(&feats[i])?))).collect::<anyhow::Result<_>>()?;
    let picked = acquire_least_confidence(&probs, 5)?;
    println!("least confidence: {picked:?}");
    for id in &picked {
        let p = &probs.iter().find(|(d, _)| d == id).unwrap().1;
        println!("    p = {:.3}  {}", p[1], ds.get(*id).unwrap().text);
    }

    let cands: Vec<(DocId, &SparseVec)> = pool.iter().map(|&i| (ids[i], &feats[i])).collect();
    let labeled: Vec<&SparseVec> = seed_set.iter().map(|&i| &feats[i]).collect();
    println!("coreset:          {:?}", acquire_coreset(&cands, &labeled, 5)?);
    Ok(())
}
