//! Trains the sentence autoencoder on a synthetic corpus and reports greedy
//! reconstruction accuracy.
//!
//! `cargo run --release --example autoencoder -- [epochs] [seed]`

use std::time::Instant;

use atpl::autoencoder::{encode_corpus, reconstruction_accuracy, train_autoencoder_ids, AutoencoderConfig};
use atpl::corpus::{synth_corpus, SynthGrammar, Vocabulary};

fn main() -> atpl::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let grammar = SynthGrammar {
        max_len: 10,
        ..SynthGrammar::default()
    };
    let corpus = synth_corpus(&grammar, 200, seed)?;
    let vocab = Vocabulary::build(&corpus.sentences);
    let data = encode_corpus(&vocab, &corpus.sentences)?;
    println!("{} sentences, vocabulary {}", data.len(), vocab.len());

    let mut cfg = AutoencoderConfig::default();
    cfg.train.epochs = epochs;
    cfg.train.seed = seed;
    let start = Instant::now();
    let (ae, log) = train_autoencoder_ids(&data, &vocab, &cfg, |epoch, loss, ae| {
        if epoch % 5 == 4 {
            let acc = reconstruction_accuracy(ae, &data, cfg.max_len)?;
            println!("epoch {epoch:3}  loss {loss:8.4}  accuracy {acc:.4}  ({:.0?})", start.elapsed());
        }
        Ok(true)
    })?;
    let acc = reconstruction_accuracy(&ae, &data, cfg.max_len)?;
    println!(
        "loss {:.3} -> {:.3}; reconstruction accuracy {:.4}",
        log.first().unwrap_or(f64::NAN),
        log.last().unwrap_or(f64::NAN),
        acc
    );
    let s = &corpus.sentences[0];
    let out = ae.reconstruct(&data[0], cfg.max_len)?;
    println!("{} => {}", s.join(" "), vocab.decode(&out).join(" "));
    Ok(())
}
