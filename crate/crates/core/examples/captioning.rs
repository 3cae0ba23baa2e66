//! Caption generation from feature vectors, scored with corpus BLEU.
//! Features are synthesized from the sentences themselves, standing in for
//! an external image encoder.
//!
//! `cargo run --release --example captioning -- [epochs] [seed]`

use atpl::captioner::{caption_vocabulary, train_captioner, CaptionerConfig};
use atpl::corpus::{bleu_score, synthesize_features, CaptionRecord};
use atpl::pipeline::{shipped_treebank, Treebank};

fn main() -> atpl::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let bank = shipped_treebank();
    let mut sents = Treebank::sentences(&bank.train);
    let n_train = sents.len();
    sents.extend(Treebank::sentences(&bank.test));
    let vocab = bank.vocabulary();
    let features = synthesize_features(&sents, &vocab, 128, seed);
    let records: Vec<CaptionRecord> = sents
        .iter()
        .zip(features)
        .enumerate()
        .map(|(i, (s, f))| CaptionRecord {
            id: format!("img{}", i + 1),
            features: f,
            references: vec![s.clone()],
        })
        .collect();
    let (train, test) = records.split_at(n_train);

    let mut cfg = CaptionerConfig::default();
    cfg.train.epochs = epochs;
    cfg.train.seed = seed;
    let vocab = caption_vocabulary(&records);
    let (cap, log) = train_captioner(train, &vocab, &cfg)?;
    println!("loss {:.3} -> {:.3}", log.first().unwrap_or(f64::NAN), log.last().unwrap_or(f64::NAN));

    for (name, split) in [("train", train), ("test", test)] {
        let mut cands = Vec::new();
        for r in split {
            let ids = cap.caption(&r.features, cfg.max_len)?;
            cands.push(vocab.decode(&ids).into_iter().map(str::to_string).collect::<Vec<_>>());
        }
        let refs: Vec<Vec<Vec<String>>> = split.iter().map(|r| r.references.clone()).collect();
        let b = bleu_score(&cands, &refs, 4)?;
        println!(
            "{name:5} BLEU-1..4 {:.3} {:.3} {:.3} {:.3}  (brevity penalty {:.3})",
            b.scores[0], b.scores[1], b.scores[2], b.scores[3], b.brevity_penalty
        );
        println!("      {} => {}", refs[0][0].join(" "), cands[0].join(" "));
    }
    Ok(())
}
