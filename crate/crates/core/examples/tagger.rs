//! POS tagging from unbinding vectors: trains the autoencoder on the
//! shipped treebank's sentences, extracts `u_1..u_T` per sentence, trains
//! the tagger and prints held-out accuracy plus a few tagged sentences.
//!
//! `cargo run --release --example tagger -- [seed]`

use atpl::pipeline::{extract_all, shipped_treebank, tagged_examples, train_stage_autoencoder, train_stage_tagger, PipelineConfig, Report, Treebank};
use atpl::tagger::TagSet;

fn main() -> atpl::Result<()> {
    env_logger::init();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = PipelineConfig::seeded(seed);
    let bank = shipped_treebank();
    let vocab = bank.vocabulary();
    let mut report = Report::default();

    let ae = train_stage_autoencoder(&bank, &vocab, &cfg.autoencoder, &mut report)?;
    let u_train = extract_all(&ae, &vocab, &bank.train)?;
    let u_test = extract_all(&ae, &vocab, &bank.test)?;

    let mut all_tags = Treebank::tags(&bank.train);
    all_tags.extend(Treebank::tags(&bank.test));
    let tags = TagSet::build(&all_tags)?;
    let train = tagged_examples(&bank.train, &u_train, &vocab, &tags)?;
    let test = tagged_examples(&bank.test, &u_test, &vocab, &tags)?;
    let tagger = train_stage_tagger(&train, &test, ae.config().d, vocab.len(), &tags, &cfg.tagger, &mut report)?;

    print!("{}", report.to_csv());
    for ex in test.iter().take(3) {
        let pred = tagger.predict(&ex.units, &ex.tokens)?;
        let line: Vec<String> = ex
            .tokens
            .iter()
            .zip(&pred)
            .map(|(&w, &t)| format!("{}_{}", vocab.token(w), tags.name(t)))
            .collect();
        println!("{}", line.join(" "));
    }
    Ok(())
}
