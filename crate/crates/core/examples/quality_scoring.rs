//! Quality scores from the built-in mock scorer, or from an HTTP endpoint
//! when `ACTIVEPRUNE_SCORER_URL` is set.
//!
//!     cargo run --example quality_scoring
//!     ACTIVEPRUNE_SCORER_URL=http://localhost:8080/score cargo run --example quality_scoring

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use activeprune::config::SCORER_URL_ENV;
use activeprune::corpus::Document;
use activeprune::quality::{
    build_prompt, score_documents, score_from_logits, HttpScorer, MockScorer, Scorer, ScorerBudget, ScoringOptions,
    TaskType,
};
use activeprune::tokenizer::Vocabulary;
use activeprune::synth;

fn main() -> anyhow::Result<()> {
    let docs = [
        Document::new(1, "the acting was superb and my friends agreed", None),
        Document::new(2, "the plot felt tedious", None),
        Document::new(3, "q#@! zz~ 99$$ plot %%", None),
    ];
    println!("prompt for doc 1:\n{}\n", build_prompt(&docs[0], &TaskType::Sentiment));

    let vocab = Arc::new(Vocabulary::build(synth::reference_corpus(2000, 1).iter().map(String::as_str), 1)?);
    let scorer: Box<dyn Scorer> = match std::env::var(SCORER_URL_ENV) {
        Ok(url) => Box::new(HttpScorer::new(url, Duration::from_secs(30))),
        Err(_) => Box::new(MockScorer::new(vocab)),
    };
    let refs: Vec<&Document> = docs.iter().collect();
    let mut budget = ScorerBudget::new(docs.len());
    let scores = score_documents(&scorer, &refs, &TaskType::Sentiment, &mut budget, &ScoringOptions::default())?;
    for (d, s) in docs.iter().zip(&scores) {
        println!("q = {:.3}  {}", s.q, d.text);
    }
    println!("{} of {} calls used", budget.calls_made(), budget.calls_allowed());

    // Servers may answer with raw logits instead of q.
    let logits: BTreeMap<String, f64> = [("yes".to_string(), 3f64.ln()), ("no".to_string(), 0.0)].into();
    println!("softmax of yes over {{yes: ln 3, no: 0}} = {}", score_from_logits(&logits)?);
    Ok(())
}
