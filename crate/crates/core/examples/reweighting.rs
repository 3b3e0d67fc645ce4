//! Perplexity reweighting on a cluster with one far outlier: the gap
//! shrinks every round, but the ordering never changes.
//!
//!     cargo run --example reweighting

use std::collections::BTreeMap;

use activeprune::corpus::DocId;
use activeprune::prune::{convergence_bound, reweight_values};

fn main() -> anyhow::Result<()> {
    let mut ppl: BTreeMap<DocId, f64> = (0..20).map(|i| (i, 10.0 + 3.0 * f64::from(i as u32) / 19.0)).collect();
    ppl.insert(99, 26.0);
    let beta = 0.1;

    for round in 1..=8 {
        // Label the two lowest-perplexity documents, then reweight the rest.
        let mut order: Vec<(DocId, f64)> = ppl.iter().map(|(&k, &v)| (k, v)).collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1));
        let labeled: Vec<f64> = order[..2].iter().map(|&(_, p)| p).collect();
        for (id, _) in &order[..2] {
            ppl.remove(id);
        }
        let before: Vec<DocId> = sorted_ids(&ppl);
        ppl = reweight_values(&ppl, &labeled, beta)?;
        let cluster_max = ppl.iter().filter(|(&id, _)| id != 99).map(|(_, &p)| p).fold(f64::MIN, f64::max);
        println!(
            "round {round}: outlier {:.3}, cluster max {:.3}, gap {:.3}, order unchanged: {}",
            ppl[&99],
            cluster_max,
            ppl[&99] - cluster_max,
            before == sorted_ids(&ppl)
        );
    }
    println!("bound for D0 = 13, delta = 13, eps = 3: {} rounds", convergence_bound(13.0, 13.0, 3.0, beta)?);
    Ok(())
}

fn sorted_ids(ppl: &BTreeMap<DocId, f64>) -> Vec<DocId> {
    let mut v: Vec<(DocId, f64)> = ppl.iter().map(|(&k, &v)| (k, v)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(id, _)| id).collect()
}
