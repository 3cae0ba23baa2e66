//! Samples a treebank from the built-in grammar and prints its layer
//! encodings.
//!
//! `cargo run --example synthetic_treebank -- [n] [seed] [out_dir]`
//!
//! With `out_dir`, writes `synth_train.trees` (first 2/3) and
//! `synth_test.trees` (the rest) there instead.

use atpl::corpus::{synth_corpus, SynthGrammar};
use atpl::parser::derive_gold_layers;
use atpl::pipeline::shipped_grammar;

fn main() -> atpl::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let grammar = shipped_grammar();
    let corpus = synth_corpus(&grammar, n, seed)?;
    if let Some(dir) = args.get(3) {
        let dir = std::path::Path::new(dir);
        let split = n * 2 / 3;
        let lines = |ts: &[atpl::corpus::ParseTree]| ts.iter().map(|t| t.to_bracketed() + "\n").collect::<String>();
        std::fs::write(dir.join("synth_train.trees"), lines(&corpus.trees[..split]))?;
        std::fs::write(dir.join("synth_test.trees"), lines(&corpus.trees[split..]))?;
        println!("wrote {split} + {} trees to {}", n - split, dir.display());
        return Ok(());
    }
    let g = SynthGrammar::default();
    println!(
        "grammar: {} POS tags, {} words, {} phrasal categories",
        g.pos_tags().len(),
        g.words().len(),
        g.phrasal_categories().len()
    );
    for tree in &corpus.trees {
        println!("\n{tree}");
        let enc = derive_gold_layers(tree)?;
        println!("  tokens   {}", enc.tokens.join(" "));
        for k in 1..=enc.height() {
            let col = enc.column(k).join(" ");
            if k == 1 {
                println!("  layer 1  POS  {col}");
            } else {
                let code: Vec<String> = enc.code(k).iter().map(u8::to_string).collect();
                println!("  layer {k}  {}  {col}", code.join(""));
            }
        }
    }
    Ok(())
}
