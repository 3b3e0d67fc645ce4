//! Train a 5-gram Kneser-Ney model on synthetic reviews, save it in both
//! formats and score a few sentences.
//!
//!     cargo run --example train_lm

use activeprune::ngram::{arpa, binary, train_from_text};
use activeprune::synth;

fn main() -> anyhow::Result<()> {
    let corpus = synth::reference_corpus(5000, 1);
    let (model, vocab, stats) = train_from_text(&corpus, 5, 1)?;
    println!("{} sentences, {} tokens, {} types", stats.sentences, stats.tokens, vocab.len());
    for (n, count) in model.counts().iter().enumerate() {
        println!("  {}-grams: {count}", n + 1);
    }
    for (n, d) in model.discounts().iter().enumerate() {
        println!("  D{} = {:.4} {:.4} {:.4}", n + 1, d.0[0], d.0[1], d.0[2]);
    }

    for text in [
        "the movie was great",
        "the villain seemed really clever and the audience laughed",
        "great was movie the",
        "zx#q 7&&p qq~ the $$",
    ] {
        println!("{:>9.2}  {text}", model.perplexity(&vocab.tokenize(text)));
    }

    let dir = tempfile::tempdir()?;
    binary::save(&model, &vocab, &dir.path().join("model.bin"))?;
    arpa::export_arpa(&model, &vocab, &dir.path().join("model.arpa"))?;
    let (reloaded, _) = binary::load(&dir.path().join("model.bin"))?;
    let t = vocab.tokenize("the plot was dull");
    assert_eq!(model.perplexity(&t), reloaded.perplexity(&t));
    println!("binary reload reproduces perplexities bit for bit");
    Ok(())
}
