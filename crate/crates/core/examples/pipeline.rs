//! Full pipeline on the shipped treebank: autoencoder, unbinding vectors,
//! POS tagger and parser. Prints the metric report as CSV.
//!
//! `RUST_LOG=info cargo run --release --example pipeline -- [seed]`

use std::time::Instant;

use atpl::pipeline::{run_pipeline, shipped_treebank, PipelineConfig};

fn main() -> atpl::Result<()> {
    env_logger::init();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let start = Instant::now();
    let (report, _) = run_pipeline(&shipped_treebank(), &PipelineConfig::seeded(seed))?;
    print!("{}", report.to_csv());
    eprintln!("finished in {:.1?}", start.elapsed());
    Ok(())
}
