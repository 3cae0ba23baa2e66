//! Data ingestion, synthesis and scoring.

pub mod bleu;
pub mod captions;
pub mod embeddings;
pub mod synth;
pub mod tagged;
pub mod treebank;
pub mod vocab;

pub use bleu::{bleu_score, BleuScore};
pub use captions::{parse_captions, synthesize_features, CaptionRecord};
pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingSource, EmbeddingTable};
pub use synth::{synth_corpus, Production, SynthCorpus, SynthGrammar};
pub use tagged::{format_tagged, parse_tagged, TaggedSentence};
pub use treebank::{parse_bracketed, parse_treebank, Constituent, ParseTree};
pub use vocab::{Vocabulary, EOS, UNK};

/// Splits each non-empty line on whitespace.
pub fn parse_sentences(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}
