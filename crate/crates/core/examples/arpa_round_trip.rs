//! Export a model to ARPA text and read it back.
//!
//!     cargo run --example arpa_round_trip

use activeprune::ngram::{arpa, train_from_text};

fn main() -> anyhow::Result<()> {
    let corpus = ["a b c", "a c b", "b a c a", "c c a b"];
    let (model, vocab, _) = train_from_text(&corpus, 3, 1)?;
    let text = arpa::to_arpa_string(&model, &vocab);
    for line in text.lines().take(14) {
        println!("{line}");
    }
    println!("...");

    let back = arpa::parse_arpa(&text, &vocab, true)?;
    for s in ["a b c", "c b a", "a a a a"] {
        let t = vocab.tokenize(s);
        println!("{s:<8} {:.6} -> {:.6}", model.perplexity(&t), back.perplexity(&t));
        assert_eq!(model.perplexity(&t).to_bits(), back.perplexity(&t).to_bits());
    }
    Ok(())
}
