//! End-to-end runs over a synthetic treebank: autoencoder, unbinding
//! extraction, tagger and parser, with metrics collected as
//! `metric,split,value` rows.

use std::fmt::Write as _;

use log::info;

use crate::autoencoder::{encode_corpus, reconstruction_accuracy, train_autoencoder_ids, Autoencoder, AutoencoderConfig};
use crate::corpus::{parse_bracketed, synth_corpus, ParseTree, SynthGrammar, Vocabulary};
use crate::error::Result;
use crate::parser::{label_sets, parseval_score, train_parser, Parser, ParserConfig, ParserExample};
use crate::tagger::{eval_accuracy, train_tagger, TagSet, TaggedExample, Tagger, TaggerConfig};
use crate::tensor::Tensor;

/// One report row.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub split: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<Metric>,
}

impl Report {
    pub fn push(&mut self, name: &str, split: &str, value: f64) {
        self.rows.push(Metric {
            name: name.to_string(),
            split: split.to_string(),
            value,
        });
    }

    pub fn get(&self, name: &str, split: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|m| m.name == name && m.split == split)
            .map(|m| m.value)
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }

    /// `metric,split,value` with a header line. Values use the shortest
    /// representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,split,value\n");
        for m in &self.rows {
            let _ = writeln!(out, "{},{},{}", m.name, m.split, m.value);
        }
        out
    }
}

/// Train/test treebank split.
#[derive(Debug, Clone)]
pub struct Treebank {
    pub train: Vec<ParseTree>,
    pub test: Vec<ParseTree>,
}

impl Treebank {
    pub fn sentences(trees: &[ParseTree]) -> Vec<Vec<String>> {
        trees
            .iter()
            .map(|t| t.tokens().into_iter().map(str::to_string).collect())
            .collect()
    }

    pub fn tags(trees: &[ParseTree]) -> Vec<Vec<String>> {
        trees
            .iter()
            .map(|t| t.tags().into_iter().map(str::to_string).collect())
            .collect()
    }

    /// Vocabulary over both splits: sentences are unlabeled text, so the
    /// unsupervised stage may see every word form.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut all = Self::sentences(&self.train);
        all.extend(Self::sentences(&self.test));
        Vocabulary::build(&all)
    }
}

pub const SHIPPED_TRAIN: &str = include_str!("../data/synth_train.trees");
pub const SHIPPED_TEST: &str = include_str!("../data/synth_test.trees");

/// The treebank shipped in `data/`: 200 training and 100 held-out trees
/// from the default grammar, sentence length at most 10.
pub fn shipped_treebank() -> Treebank {
    let read = |text: &str| -> Vec<ParseTree> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse_bracketed(l).expect("shipped treebank parses"))
            .collect()
    };
    Treebank {
        train: read(SHIPPED_TRAIN),
        test: read(SHIPPED_TEST),
    }
}

/// Grammar and seed used to generate the shipped treebank.
pub fn shipped_grammar() -> SynthGrammar {
    SynthGrammar {
        max_len: 10,
        ..SynthGrammar::default()
    }
}

pub const SHIPPED_SEED: u64 = 7;

pub fn generate_treebank(grammar: &SynthGrammar, train: usize, test: usize, seed: u64) -> Result<Treebank> {
    let mut c = synth_corpus(grammar, train + test, seed)?;
    let test_trees = c.trees.split_off(train);
    Ok(Treebank {
        train: c.trees,
        test: test_trees,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub autoencoder: AutoencoderConfig,
    pub tagger: TaggerConfig,
    pub parser: ParserConfig,
}

impl PipelineConfig {
    /// Defaults with every stage seeded from `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut c = PipelineConfig {
            seed,
            autoencoder: AutoencoderConfig::default(),
            tagger: TaggerConfig::default(),
            parser: ParserConfig::default(),
        };
        c.autoencoder.train.seed = seed;
        c.tagger.train.seed = seed.wrapping_add(1);
        c.parser.train.seed = seed.wrapping_add(2);
        c
    }
}

pub fn train_stage_autoencoder(
    bank: &Treebank,
    vocab: &Vocabulary,
    cfg: &AutoencoderConfig,
    report: &mut Report,
) -> Result<Autoencoder> {
    let train = encode_corpus(vocab, &Treebank::sentences(&bank.train))?;
    let test = encode_corpus(vocab, &Treebank::sentences(&bank.test))?;
    let (ae, log) = train_autoencoder_ids(&train, vocab, cfg, |_, _, _| Ok(true))?;
    report.push("autoencoder_loss_first", "train", log.first().unwrap_or(f64::NAN));
    report.push("autoencoder_loss_last", "train", log.last().unwrap_or(f64::NAN));
    let acc_train = reconstruction_accuracy(&ae, &train, cfg.max_len)?;
    let acc_test = reconstruction_accuracy(&ae, &test, cfg.max_len)?;
    info!("reconstruction accuracy train {acc_train:.4} test {acc_test:.4}");
    report.push("reconstruction_accuracy", "train", acc_train);
    report.push("reconstruction_accuracy", "test", acc_test);
    Ok(ae)
}

/// Unbinding vectors of every sentence in `trees`.
pub fn extract_all(ae: &Autoencoder, vocab: &Vocabulary, trees: &[ParseTree]) -> Result<Vec<Vec<Tensor>>> {
    let ids = encode_corpus(vocab, &Treebank::sentences(trees))?;
    ids.iter()
        .enumerate()
        .map(|(i, s)| Ok(ae.extract(&format!("s{}", i + 1), s)?.units))
        .collect()
}

pub fn tagged_examples(
    trees: &[ParseTree],
    units: &[Vec<Tensor>],
    vocab: &Vocabulary,
    tags: &TagSet,
) -> Result<Vec<TaggedExample>> {
    trees
        .iter()
        .zip(units)
        .enumerate()
        .map(|(i, (t, u))| {
            Ok(TaggedExample {
                tokens: vocab.encode_strict(&t.tokens(), i + 1)?,
                units: u.clone(),
                tags: tags.encode(&t.tags(), i + 1)?,
            })
        })
        .collect()
}

pub fn train_stage_tagger(
    train: &[TaggedExample],
    test: &[TaggedExample],
    d: usize,
    vocab: usize,
    tags: &TagSet,
    cfg: &TaggerConfig,
    report: &mut Report,
) -> Result<Tagger> {
    let tagger = Tagger::new(cfg, d, vocab, tags.len(), cfg.train.seed)?;
    let (tagger, log) = train_tagger(tagger, train, &cfg.train)?;
    report.push("tagger_loss_first", "train", log.first().unwrap_or(f64::NAN));
    report.push("tagger_loss_last", "train", log.last().unwrap_or(f64::NAN));
    let a_train = eval_accuracy(&tagger, train)?;
    let a_test = eval_accuracy(&tagger, test)?;
    info!("tagger accuracy train {a_train:.4} test {a_test:.4}");
    report.push("tagger_accuracy", "train", a_train);
    report.push("tagger_accuracy", "test", a_test);
    Ok(tagger)
}

/// Scores a parser on `examples` with gold POS tags, once with the gold
/// layer codes and once with predicted codes.
pub fn evaluate_parser(parser: &Parser, examples: &[ParserExample], split: &str, report: &mut Report) -> Result<()> {
    let gold: Vec<ParseTree> = examples.iter().map(|e| e.tree.clone()).collect();
    let mut with_codes = Vec::with_capacity(examples.len());
    let mut predicted = Vec::with_capacity(examples.len());
    for ex in examples {
        let enc = &ex.encoding;
        let gt = parser.parse_with_codes(&enc.tokens, enc.pos(), &ex.units, &enc.codes)?;
        with_codes.push(parse_bracketed(&gt.bracketed)?);
        let p = parser.parse(&enc.tokens, enc.pos(), &ex.units)?;
        predicted.push(parse_bracketed(&p.bracketed)?);
    }
    let gt = parseval_score(&with_codes, &gold)?;
    let pr = parseval_score(&predicted, &gold)?;
    info!("{split}: F1 with gold codes {:.4}, with predicted codes {:.4}", gt.f1, pr.f1);
    for (name, s) in [("gold_codes", gt), ("predicted_codes", pr)] {
        report.push(&format!("parse_precision_{name}"), split, s.precision);
        report.push(&format!("parse_recall_{name}"), split, s.recall);
        report.push(&format!("parse_f1_{name}"), split, s.f1);
    }
    Ok(())
}

pub fn parser_examples(trees: &[ParseTree], units: &[Vec<Tensor>]) -> Result<Vec<ParserExample>> {
    trees
        .iter()
        .zip(units)
        .map(|(t, u)| ParserExample::new(t.clone(), u.clone()))
        .collect()
}

/// Trained models of a full run.
#[derive(Debug, Clone)]
pub struct PipelineModels {
    pub vocab: Vocabulary,
    pub autoencoder: Autoencoder,
    pub tagger: Tagger,
    pub tags: TagSet,
    pub parser: Parser,
}

/// Runs every stage on `bank` and returns the metric report.
pub fn run_pipeline(bank: &Treebank, cfg: &PipelineConfig) -> Result<(Report, PipelineModels)> {
    let mut report = Report::default();
    let vocab = bank.vocabulary();
    report.push("vocabulary_size", "all", vocab.len() as f64);
    report.push("sentences", "train", bank.train.len() as f64);
    report.push("sentences", "test", bank.test.len() as f64);

    let ae = train_stage_autoencoder(bank, &vocab, &cfg.autoencoder, &mut report)?;
    let u_train = extract_all(&ae, &vocab, &bank.train)?;
    let u_test = extract_all(&ae, &vocab, &bank.test)?;

    let mut all_tags = Treebank::tags(&bank.train);
    all_tags.extend(Treebank::tags(&bank.test));
    let tags = TagSet::build(&all_tags)?;
    let t_train = tagged_examples(&bank.train, &u_train, &vocab, &tags)?;
    let t_test = tagged_examples(&bank.test, &u_test, &vocab, &tags)?;
    let d = ae.config().d;
    let tagger = train_stage_tagger(&t_train, &t_test, d, vocab.len(), &tags, &cfg.tagger, &mut report)?;

    let mut all_trees = bank.train.clone();
    all_trees.extend(bank.test.iter().cloned());
    let (pos, cats) = label_sets(&all_trees)?;
    let p_train = parser_examples(&bank.train, &u_train)?;
    let p_test = parser_examples(&bank.test, &u_test)?;
    let (parser, log) = train_parser(&p_train, pos, cats, &cfg.parser)?;
    report.push("parser_loss_first", "train", log.first().unwrap_or(f64::NAN));
    report.push("parser_loss_last", "train", log.last().unwrap_or(f64::NAN));
    evaluate_parser(&parser, &p_train, "train", &mut report)?;
    evaluate_parser(&parser, &p_test, "test", &mut report)?;

    Ok((
        report,
        PipelineModels {
            vocab,
            autoencoder: ae,
            tagger,
            tags,
            parser,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_treebank_matches_generator() {
        let bank = shipped_treebank();
        assert_eq!(bank.train.len(), 200);
        assert_eq!(bank.test.len(), 100);
        let regen = generate_treebank(&shipped_grammar(), 200, 100, SHIPPED_SEED).unwrap();
        assert_eq!(regen.train, bank.train);
        assert_eq!(regen.test, bank.test);
        assert!(bank.train.iter().all(|t| t.len() <= 10));
    }

    #[test]
    fn report_csv_layout() {
        let mut r = Report::default();
        r.push("f1", "test", 0.5);
        r.push("n", "all", 3.0);
        assert_eq!(r.to_csv(), "metric,split,value\nf1,test,0.5\nn,all,3\n");
        assert_eq!(r.get("n", "all"), Some(3.0));
    }
}
