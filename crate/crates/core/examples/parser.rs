//! Constituency parsing from unbinding vectors. The parser is trained on
//! the shipped treebank and scored twice on held-out trees: once rebuilding
//! from gold layer codes (only categories predicted), once with predicted
//! codes.
//!
//! `cargo run --release --example parser -- [seed]`

use atpl::parser::{label_sets, train_parser};
use atpl::pipeline::{evaluate_parser, extract_all, parser_examples, shipped_treebank, train_stage_autoencoder, PipelineConfig, Report};

fn main() -> atpl::Result<()> {
    env_logger::init();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = PipelineConfig::seeded(seed);
    let bank = shipped_treebank();
    let vocab = bank.vocabulary();
    let mut report = Report::default();

    let ae = train_stage_autoencoder(&bank, &vocab, &cfg.autoencoder, &mut report)?;
    let train = parser_examples(&bank.train, &extract_all(&ae, &vocab, &bank.train)?)?;
    let test = parser_examples(&bank.test, &extract_all(&ae, &vocab, &bank.test)?)?;

    let mut trees = bank.train.clone();
    trees.extend(bank.test.iter().cloned());
    let (pos, cats) = label_sets(&trees)?;
    let (parser, _) = train_parser(&train, pos, cats, &cfg.parser)?;
    evaluate_parser(&parser, &test, "test", &mut report)?;
    print!("{}", report.to_csv());

    for ex in test.iter().take(3) {
        let enc = &ex.encoding;
        let out = parser.parse(&enc.tokens, enc.pos(), &ex.units)?;
        println!("gold      {}", ex.tree.to_bracketed());
        println!("predicted {}", out.bracketed);
    }
    Ok(())
}
