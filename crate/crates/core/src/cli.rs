//! Command-line front end. Every subcommand reads its settings from an
//! optional `--config` file, overridden by flags, and writes a
//! `metric,split,value` CSV report to `--report` (or standard output).
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 1 for
//! data errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser as ClapParser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{load_checkpoint, save_checkpoint};
use crate::autoencoder::{
    encode_corpus, fit_autoencoder, format_unbindings, parse_unbindings, reconstruction_accuracy, Autoencoder,
    AutoencoderConfig,
};
use crate::captioner::{caption_vocabulary, fit_captioner, Captioner, CaptionerConfig};
use crate::config::RunConfig;
use crate::corpus::{
    bleu_score, format_tagged, load_embeddings, parse_captions, parse_sentences, parse_tagged, parse_treebank,
    synthesize_features, CaptionRecord, ParseTree, SynthGrammar, Vocabulary,
};
use crate::error::{Error, Result};
use crate::gradsuite::gradient_suite;
use crate::parser::{build_tree, label_sets, parse_encoding, train_parser, Parser, ParserConfig};
use crate::pipeline::{evaluate_parser, generate_treebank, parser_examples, Report, Treebank};
use crate::tagger::{
    confusion, eval_accuracy, format_confusion_csv, train_tagger, TagSet, TaggedExample, Tagger, TaggerConfig,
};
use crate::tensor::Tensor;
use crate::train::TrainConfig;

pub const AUTOENCODER_CKPT: &str = "autoencoder.ckpt";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const TAGGER_CKPT: &str = "tagger.ckpt";
pub const TAGS_FILE: &str = "tags.txt";
pub const PARSER_CKPT: &str = "parser.ckpt";
pub const POS_FILE: &str = "pos.txt";
pub const CATEGORIES_FILE: &str = "categories.txt";
pub const CAPTIONER_CKPT: &str = "captioner.ckpt";

#[derive(ClapParser, Debug)]
#[command(name = "atpl", version, about = "Tensor product decoding, tagging and parsing", arg_required_else_help = true)]
struct Cli {
    /// `key = value` settings file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed (falls back to ATPL_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV report destination; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic treebank, its sentences, tags and caption records.
    GenCorpus(GenCorpusArgs),
    /// Train the sentence autoencoder.
    TrainAutoencoder(TrainAutoencoderArgs),
    /// Write the unbinding vectors of each sentence.
    ExtractU(ExtractArgs),
    /// Train the POS tagger on unbinding vectors.
    TrainTagger(TrainTaggerArgs),
    /// Score a trained tagger.
    EvalTagger(EvalTaggerArgs),
    /// Train the constituency parser on unbinding vectors.
    TrainParser(TrainParserArgs),
    /// Print bracketed parses, or rebuild a tree from a layer-encoding file.
    Parse(ParseArgs),
    /// Score a trained parser with gold and predicted layer codes.
    EvalParse(EvalParseArgs),
    /// Train the caption decoder on feature vectors.
    TrainCaptioner(TrainCaptionerArgs),
    /// Generate captions greedily.
    Caption(CaptionArgs),
    /// Corpus BLEU-1..4 of candidate captions.
    EvalBleu(EvalBleuArgs),
    /// Finite-difference check of every trainable block.
    CheckGradients,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Gradient-norm cap; 0 disables clipping.
    #[arg(long)]
    clip_norm: Option<f64>,
}

impl TrainFlags {
    fn apply(&self, c: &mut RunConfig) {
        c.set("epochs", self.epochs);
        c.set("lr", self.lr);
        c.set("batch_size", self.batch_size);
        c.set("clip_norm", self.clip_norm);
    }
}

#[derive(Args, Debug)]
struct GenCorpusArgs {
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Dimension of the synthetic caption features.
    #[arg(long)]
    feature_dim: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainAutoencoderArgs {
    /// Training sentences, one per line.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Held-out sentences; scored, and included in the vocabulary.
    #[arg(long, value_name = "FILE")]
    test_input: Option<PathBuf>,
    /// Word vectors for the decoder embeddings.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Trained autoencoder directory.
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainTaggerArgs {
    #[arg(long, value_name = "FILE")]
    tagged: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    units: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    test_tagged: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    test_units: Option<PathBuf>,
    /// Autoencoder directory supplying the vocabulary.
    #[arg(long, value_name = "DIR")]
    autoencoder: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    inner: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct EvalTaggerArgs {
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    autoencoder: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    tagged: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    units: Option<PathBuf>,
    /// Where to write `gold,predicted,count` rows.
    #[arg(long, value_name = "FILE")]
    confusion: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args, Debug)]
struct TrainParserArgs {
    #[arg(long, value_name = "FILE")]
    treebank: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    units: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    inner: Option<usize>,
    #[arg(long)]
    max_height: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ParseArgs {
    /// Layer-encoding file to rebuild directly; no model needed.
    #[arg(long, value_name = "FILE")]
    encodings: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    /// Sentences with POS tags, `token_TAG` format.
    #[arg(long, value_name = "FILE")]
    tagged: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    units: Option<PathBuf>,
    #[arg(long)]
    max_height: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalParseArgs {
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    treebank: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    units: Option<PathBuf>,
    #[arg(long)]
    max_height: Option<usize>,
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args, Debug)]
struct TrainCaptionerArgs {
    #[arg(long, value_name = "FILE")]
    captions: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct CaptionArgs {
    #[arg(long, value_name = "DIR")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    captions: Option<PathBuf>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Where to write `id<TAB>caption` lines; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalBleuArgs {
    /// `id<TAB>caption` lines.
    #[arg(long, value_name = "FILE")]
    candidates: Option<PathBuf>,
    /// Caption records holding the references.
    #[arg(long, value_name = "FILE")]
    captions: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
}

/// Why a command failed.
#[derive(Debug)]
enum Failure {
    Usage(Error),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn usage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Usage)
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Results go to standard output.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_to(argv, &mut lock)
}

/// As [`run`], writing results to `out`.
pub fn run_to<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            eprintln!("run `atpl --help` for usage");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => usage(RunConfig::load(p))?,
        None => RunConfig::default(),
    };
    cfg.set("seed", cli.seed);
    cfg.set("report", cli.report.as_ref().map(|p| p.display()));
    let report_path = usage(cfg.output_file("report"))?;
    let report = match cli.command {
        Command::GenCorpus(a) => {
            cfg.set("out", a.out.as_ref().map(|p| p.display()));
            cfg.set("train_size", a.train_size);
            cfg.set("test_size", a.test_size);
            cfg.set("max_len", a.max_len);
            cfg.set("feature_dim", a.feature_dim);
            gen_corpus(&cfg)?
        }
        Command::TrainAutoencoder(a) => {
            cfg.set("input", a.input.as_ref().map(|p| p.display()));
            cfg.set("test_input", a.test_input.as_ref().map(|p| p.display()));
            cfg.set("embeddings", a.embeddings.as_ref().map(|p| p.display()));
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("d", a.d);
            cfg.set("hidden", a.hidden);
            cfg.set("context", a.context);
            cfg.set("embed", a.embed);
            cfg.set("max_len", a.max_len);
            a.train.apply(&mut cfg);
            train_autoencoder_cmd(&cfg)?
        }
        Command::ExtractU(a) => {
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("input", a.input.as_ref().map(|p| p.display()));
            cfg.set("out", a.out.as_ref().map(|p| p.display()));
            extract_u(&cfg)?
        }
        Command::TrainTagger(a) => {
            cfg.set("tagged", a.tagged.as_ref().map(|p| p.display()));
            cfg.set("units", a.units.as_ref().map(|p| p.display()));
            cfg.set("test_tagged", a.test_tagged.as_ref().map(|p| p.display()));
            cfg.set("test_units", a.test_units.as_ref().map(|p| p.display()));
            cfg.set("autoencoder", a.autoencoder.as_ref().map(|p| p.display()));
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("hidden", a.hidden);
            cfg.set("inner", a.inner);
            a.train.apply(&mut cfg);
            train_tagger_cmd(&cfg)?
        }
        Command::EvalTagger(a) => {
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("autoencoder", a.autoencoder.as_ref().map(|p| p.display()));
            cfg.set("tagged", a.tagged.as_ref().map(|p| p.display()));
            cfg.set("units", a.units.as_ref().map(|p| p.display()));
            cfg.set("confusion", a.confusion.as_ref().map(|p| p.display()));
            cfg.set("split", a.split.as_ref());
            eval_tagger_cmd(&cfg)?
        }
        Command::TrainParser(a) => {
            cfg.set("treebank", a.treebank.as_ref().map(|p| p.display()));
            cfg.set("units", a.units.as_ref().map(|p| p.display()));
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("hidden", a.hidden);
            cfg.set("inner", a.inner);
            cfg.set("max_height", a.max_height);
            a.train.apply(&mut cfg);
            train_parser_cmd(&cfg)?
        }
        Command::Parse(a) => {
            cfg.set("encodings", a.encodings.as_ref().map(|p| p.display()));
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("tagged", a.tagged.as_ref().map(|p| p.display()));
            cfg.set("units", a.units.as_ref().map(|p| p.display()));
            cfg.set("max_height", a.max_height);
            cfg.set("out", a.out.as_ref().map(|p| p.display()));
            parse_cmd(&cfg, out)?
        }
        Command::EvalParse(a) => {
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("treebank", a.treebank.as_ref().map(|p| p.display()));
            cfg.set("units", a.units.as_ref().map(|p| p.display()));
            cfg.set("max_height", a.max_height);
            cfg.set("split", a.split.as_ref());
            eval_parse_cmd(&cfg)?
        }
        Command::TrainCaptioner(a) => {
            cfg.set("captions", a.captions.as_ref().map(|p| p.display()));
            cfg.set("embeddings", a.embeddings.as_ref().map(|p| p.display()));
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("d", a.d);
            cfg.set("hidden", a.hidden);
            cfg.set("max_len", a.max_len);
            a.train.apply(&mut cfg);
            train_captioner_cmd(&cfg)?
        }
        Command::Caption(a) => {
            cfg.set("model", a.model.as_ref().map(|p| p.display()));
            cfg.set("captions", a.captions.as_ref().map(|p| p.display()));
            cfg.set("max_len", a.max_len);
            cfg.set("out", a.out.as_ref().map(|p| p.display()));
            caption_cmd(&cfg, out)?
        }
        Command::EvalBleu(a) => {
            cfg.set("candidates", a.candidates.as_ref().map(|p| p.display()));
            cfg.set("captions", a.captions.as_ref().map(|p| p.display()));
            cfg.set("split", a.split.as_ref());
            eval_bleu_cmd(&cfg)?
        }
        Command::CheckGradients => check_gradients_cmd(&cfg, report_path.as_deref(), out)?,
    };
    if let Some(report) = report {
        emit_report(&report, report_path.as_deref(), out)?;
    }
    Ok(())
}

/// Writes the report to `path`, or to `out` when there is none.
fn emit_report(report: &Report, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, report.to_csv())?,
        None => out.write_all(report.to_csv().as_bytes())?,
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn train_settings(cfg: &RunConfig, defaults: TrainConfig, seed: u64) -> Result<TrainConfig> {
    let clip = cfg.get::<f64>("clip_norm")?;
    let t = TrainConfig {
        epochs: cfg.get_or("epochs", defaults.epochs)?,
        batch_size: cfg.get_or("batch_size", defaults.batch_size)?,
        lr: cfg.get_or("lr", defaults.lr)?,
        clip_norm: match clip {
            None => defaults.clip_norm,
            Some(c) if c > 0.0 => Some(c),
            Some(_) => None,
        },
        seed,
    };
    t.validate()?;
    Ok(t)
}

fn gen_corpus(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let seed = usage(cfg.seed())?;
    let out = usage(cfg.output_dir("out"))?;
    let train_n = usage(cfg.get_or("train_size", 200usize))?;
    let test_n = usage(cfg.get_or("test_size", 100usize))?;
    let max_len = usage(cfg.get_or("max_len", 10usize))?;
    let feature_dim = usage(cfg.get_or("feature_dim", 128usize))?;
    let grammar = SynthGrammar {
        max_len,
        ..SynthGrammar::default()
    };
    let bank = generate_treebank(&grammar, train_n, test_n, seed)?;
    let vocab = bank.vocabulary();
    let mut all_sents = Treebank::sentences(&bank.train);
    all_sents.extend(Treebank::sentences(&bank.test));
    let features = synthesize_features(&all_sents, &vocab, feature_dim, seed);

    let mut report = Report::default();
    report.push("vocabulary_size", "all", vocab.len() as f64);
    let mut offset = 0;
    for (split, trees) in [("train", &bank.train), ("test", &bank.test)] {
        let sents = Treebank::sentences(trees);
        let tags = Treebank::tags(trees);
        let mut text = String::new();
        let mut tagged = String::new();
        let mut brackets = String::new();
        let mut captions = String::new();
        for (i, (t, s)) in trees.iter().zip(&sents).enumerate() {
            brackets.push_str(&t.to_bracketed());
            brackets.push('\n');
            text.push_str(&s.join(" "));
            text.push('\n');
            tagged.push_str(&format_tagged(s, &tags[i]));
            tagged.push('\n');
            let rec = CaptionRecord {
                id: format!("{split}{}", i + 1),
                features: features[offset + i].clone(),
                references: vec![s.clone()],
            };
            captions.push_str(&crate::corpus::captions::format_caption(&rec));
            captions.push('\n');
        }
        offset += trees.len();
        fs::write(out.join(format!("{split}.trees")), brackets)?;
        fs::write(out.join(format!("{split}.txt")), text)?;
        fs::write(out.join(format!("{split}.tagged")), tagged)?;
        fs::write(out.join(format!("captions_{split}.tsv")), captions)?;
        report.push("sentences", split, trees.len() as f64);
        report.push("tokens", split, sents.iter().map(Vec::len).sum::<usize>() as f64);
    }
    info!("wrote corpus to {}", out.display());
    Ok(Some(report))
}

fn load_autoencoder(dir: &Path) -> Result<(Autoencoder, Vocabulary)> {
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    let ae = Autoencoder::from_checkpoint(&load_checkpoint(&dir.join(AUTOENCODER_CKPT))?, &vocab)?;
    Ok((ae, vocab))
}

fn train_autoencoder_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let seed = usage(cfg.seed())?;
    let input = usage(cfg.input_file("input"))?;
    let test_input = usage(cfg.optional_input_file("test_input"))?;
    let embeddings = usage(cfg.optional_input_file("embeddings"))?;
    let model_dir = usage(cfg.output_dir("model"))?;
    let base = AutoencoderConfig::default();
    let ae_cfg = usage((|| {
        Ok(AutoencoderConfig {
            d: cfg.get_or("d", base.d)?,
            hidden: cfg.get_or("hidden", base.hidden)?,
            context: cfg.get_or("context", base.context)?,
            embed: cfg.get_or("embed", base.embed)?,
            max_len: cfg.get_or("max_len", base.max_len)?,
            train: train_settings(cfg, base.train, seed)?,
        })
    })())?;

    let train = parse_sentences(&read(&input)?);
    let test = match &test_input {
        Some(p) => parse_sentences(&read(p)?),
        None => Vec::new(),
    };
    let mut all = train.clone();
    all.extend(test.iter().cloned());
    let vocab = Vocabulary::build(&all);
    let train_ids = encode_corpus(&vocab, &train)?;
    let test_ids = encode_corpus(&vocab, &test)?;

    let mut report = Report::default();
    report.push("vocabulary_size", "all", vocab.len() as f64);
    let mut ae = Autoencoder::new(&ae_cfg, &vocab, seed)?;
    if let Some(p) = &embeddings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = load_embeddings(p, &vocab, ae_cfg.d, &mut rng)?;
        report.push("embeddings_covered", "all", table.covered as f64);
        ae.store.assign(ae.decoder.embed, table.matrix)?;
    }
    let (ae, hist) = fit_autoencoder(ae, &train_ids, &ae_cfg.train, |_, _, _| Ok(true))?;
    save_checkpoint(&ae.store, &model_dir.join(AUTOENCODER_CKPT))?;
    vocab.save(&model_dir.join(VOCAB_FILE))?;

    report.push("autoencoder_loss_first", "train", hist.first().unwrap_or(f64::NAN));
    report.push("autoencoder_loss_last", "train", hist.last().unwrap_or(f64::NAN));
    report.push(
        "reconstruction_accuracy",
        "train",
        reconstruction_accuracy(&ae, &train_ids, ae_cfg.max_len)?,
    );
    if !test_ids.is_empty() {
        report.push(
            "reconstruction_accuracy",
            "test",
            reconstruction_accuracy(&ae, &test_ids, ae_cfg.max_len)?,
        );
    }
    Ok(Some(report))
}

fn extract_u(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let model = usage(cfg.input_dir("model"))?;
    let input = usage(cfg.input_file("input"))?;
    let out = usage(cfg.output_file("out"))?
        .ok_or_else(|| Failure::Usage(Error::Config("missing required setting `out` (flag --out)".into())))?;
    let (ae, vocab) = load_autoencoder(&model)?;
    let sents = parse_sentences(&read(&input)?);
    let ids = encode_corpus(&vocab, &sents)?;
    let seqs = ids
        .iter()
        .enumerate()
        .map(|(i, s)| ae.extract(&format!("s{}", i + 1), s))
        .collect::<Result<Vec<_>>>()?;
    fs::write(&out, format_unbindings(&seqs))?;
    let mut report = Report::default();
    report.push("sentences", "all", seqs.len() as f64);
    report.push("tokens", "all", seqs.iter().map(|s| s.len()).sum::<usize>() as f64);
    Ok(Some(report))
}

/// Unbinding vectors of `path`, checked against the sentence lengths.
fn load_units(path: &Path, lengths: &[usize]) -> Result<Vec<Vec<Tensor>>> {
    let seqs = parse_unbindings(&read(path)?)?;
    if seqs.len() != lengths.len() {
        return Err(Error::Ingest {
            line: seqs.len().min(lengths.len()) + 1,
            message: format!(
                "{} unbinding records for {} sentences in {}",
                seqs.len(),
                lengths.len(),
                path.display()
            ),
        });
    }
    for (i, (s, &n)) in seqs.iter().zip(lengths).enumerate() {
        if s.len() != n {
            return Err(Error::Ingest {
                line: i + 1,
                message: format!("record `{}` has {} vectors for a {n}-token sentence", s.id, s.len()),
            });
        }
    }
    Ok(seqs.into_iter().map(|s| s.units).collect())
}

fn tagged_data(tagged: &Path, units: &Path, vocab: &Vocabulary, tags: Option<&TagSet>) -> Result<(Vec<TaggedExample>, Vec<Vec<String>>)> {
    let sents = parse_tagged(&read(tagged)?)?;
    let lengths: Vec<usize> = sents.iter().map(|s| s.tokens.len()).collect();
    let units = load_units(units, &lengths)?;
    let tag_lists: Vec<Vec<String>> = sents.iter().map(|s| s.tags.clone()).collect();
    let mut out = Vec::with_capacity(sents.len());
    if let Some(tags) = tags {
        for (i, (s, u)) in sents.iter().zip(units).enumerate() {
            out.push(TaggedExample {
                tokens: vocab.encode_strict(&s.tokens, i + 1)?,
                units: u,
                tags: tags.encode(&s.tags, i + 1)?,
            });
        }
    }
    Ok((out, tag_lists))
}

fn train_tagger_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let seed = usage(cfg.seed())?;
    let tagged = usage(cfg.input_file("tagged"))?;
    let units = usage(cfg.input_file("units"))?;
    let test_tagged = usage(cfg.optional_input_file("test_tagged"))?;
    let test_units = usage(cfg.optional_input_file("test_units"))?;
    if test_tagged.is_some() != test_units.is_some() {
        return Err(Failure::Usage(Error::Config(
            "--test-tagged and --test-units must be given together".into(),
        )));
    }
    let ae_dir = usage(cfg.input_dir("autoencoder"))?;
    let model_dir = usage(cfg.output_dir("model"))?;
    let base = TaggerConfig::default();
    let t_cfg = usage((|| {
        Ok(TaggerConfig {
            hidden: cfg.get_or("hidden", base.hidden)?,
            inner: cfg.get_or("inner", base.inner)?,
            train: train_settings(cfg, base.train, seed)?,
        })
    })())?;

    let vocab = Vocabulary::load(&ae_dir.join(VOCAB_FILE))?;
    let (_, mut all_tags) = tagged_data(&tagged, &units, &vocab, None)?;
    if let Some(p) = &test_tagged {
        all_tags.extend(parse_tagged(&read(p)?)?.into_iter().map(|s| s.tags));
    }
    let tags = TagSet::build(&all_tags)?;
    let (train, _) = tagged_data(&tagged, &units, &vocab, Some(&tags))?;
    let test = match (&test_tagged, &test_units) {
        (Some(t), Some(u)) => tagged_data(t, u, &vocab, Some(&tags))?.0,
        _ => Vec::new(),
    };
    let d = train
        .first()
        .and_then(|e| e.units.first())
        .map(Tensor::len)
        .ok_or_else(|| Error::contract("tagger training needs a non-empty sentence"))?;
    let tagger = Tagger::new(&t_cfg, d, vocab.len(), tags.len(), seed)?;
    let (tagger, hist) = train_tagger(tagger, &train, &t_cfg.train)?;
    save_checkpoint(&tagger.store, &model_dir.join(TAGGER_CKPT))?;
    tags.save(&model_dir.join(TAGS_FILE))?;

    let mut report = Report::default();
    report.push("tagger_loss_first", "train", hist.first().unwrap_or(f64::NAN));
    report.push("tagger_loss_last", "train", hist.last().unwrap_or(f64::NAN));
    report.push("tagger_accuracy", "train", eval_accuracy(&tagger, &train)?);
    if !test.is_empty() {
        report.push("tagger_accuracy", "test", eval_accuracy(&tagger, &test)?);
    }
    Ok(Some(report))
}

fn eval_tagger_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let model = usage(cfg.input_dir("model"))?;
    let ae_dir = usage(cfg.input_dir("autoencoder"))?;
    let tagged = usage(cfg.input_file("tagged"))?;
    let units = usage(cfg.input_file("units"))?;
    let confusion_path = usage(cfg.output_file("confusion"))?;
    let split = cfg.raw("split").unwrap_or("test").to_string();

    let vocab = Vocabulary::load(&ae_dir.join(VOCAB_FILE))?;
    let tags = TagSet::load(&model.join(TAGS_FILE))?;
    let tagger = Tagger::from_checkpoint(&load_checkpoint(&model.join(TAGGER_CKPT))?)?;
    if tagger.num_tags() != tags.len() {
        return Err(Failure::Data(Error::Config(format!(
            "tagger has {} outputs but the tag file lists {}",
            tagger.num_tags(),
            tags.len()
        ))));
    }
    let (data, _) = tagged_data(&tagged, &units, &vocab, Some(&tags))?;
    let mut report = Report::default();
    report.push("tagger_accuracy", &split, eval_accuracy(&tagger, &data)?);
    if let Some(p) = confusion_path {
        fs::write(p, format_confusion_csv(&confusion(&tagger, &data)?, &tags))?;
    }
    Ok(Some(report))
}

fn load_parser(dir: &Path, max_height: usize) -> Result<Parser> {
    let pos = TagSet::load(&dir.join(POS_FILE))?;
    let cats = TagSet::load(&dir.join(CATEGORIES_FILE))?;
    Parser::from_checkpoint(&load_checkpoint(&dir.join(PARSER_CKPT))?, pos, cats, max_height)
}

fn treebank_with_units(treebank: &Path, units: &Path) -> Result<(Vec<ParseTree>, Vec<Vec<Tensor>>)> {
    let trees = parse_treebank(&read(treebank)?)?;
    let lengths: Vec<usize> = trees.iter().map(ParseTree::len).collect();
    let units = load_units(units, &lengths)?;
    Ok((trees, units))
}

fn train_parser_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let seed = usage(cfg.seed())?;
    let treebank = usage(cfg.input_file("treebank"))?;
    let units = usage(cfg.input_file("units"))?;
    let model_dir = usage(cfg.output_dir("model"))?;
    let base = ParserConfig::default();
    let p_cfg = usage((|| {
        Ok(ParserConfig {
            hidden: cfg.get_or("hidden", base.hidden)?,
            inner: cfg.get_or("inner", base.inner)?,
            max_height: cfg.get_or("max_height", base.max_height)?,
            train: train_settings(cfg, base.train, seed)?,
        })
    })())?;

    let (trees, units) = treebank_with_units(&treebank, &units)?;
    let (pos, cats) = label_sets(&trees)?;
    let examples = parser_examples(&trees, &units)?;
    let (parser, hist) = train_parser(&examples, pos, cats, &p_cfg)?;
    save_checkpoint(&parser.store, &model_dir.join(PARSER_CKPT))?;
    parser.pos.save(&model_dir.join(POS_FILE))?;
    parser.categories.save(&model_dir.join(CATEGORIES_FILE))?;

    let mut report = Report::default();
    report.push("parser_loss_first", "train", hist.first().unwrap_or(f64::NAN));
    report.push("parser_loss_last", "train", hist.last().unwrap_or(f64::NAN));
    evaluate_parser(&parser, &examples, "train", &mut report)?;
    Ok(Some(report))
}

fn parse_cmd(cfg: &RunConfig, out: &mut dyn Write) -> std::result::Result<Option<Report>, Failure> {
    let out_path = usage(cfg.output_file("out"))?;
    let mut lines = Vec::new();
    if let Some(p) = usage(cfg.optional_input_file("encodings"))? {
        let enc = parse_encoding(&read(&p)?)?;
        lines.push(build_tree(&enc.tokens, &enc.columns, &enc.codes, enc.height())?);
    } else {
        let model = usage(cfg.input_dir("model"))?;
        let tagged = usage(cfg.input_file("tagged"))?;
        let units = usage(cfg.input_file("units"))?;
        let max_height = usage(cfg.get_or("max_height", ParserConfig::default().max_height))?;
        let parser = load_parser(&model, max_height)?;
        let sents = parse_tagged(&read(&tagged)?)?;
        let lengths: Vec<usize> = sents.iter().map(|s| s.tokens.len()).collect();
        let units = load_units(&units, &lengths)?;
        for (s, u) in sents.iter().zip(&units) {
            lines.push(parser.parse(&s.tokens, &s.tags, u)?.bracketed);
        }
    }
    let mut text = lines.join("\n");
    text.push('\n');
    match out_path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    let mut report = Report::default();
    report.push("sentences", "all", lines.len() as f64);
    Ok(cfg.raw("report").map(|_| report))
}

fn eval_parse_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let model = usage(cfg.input_dir("model"))?;
    let treebank = usage(cfg.input_file("treebank"))?;
    let units = usage(cfg.input_file("units"))?;
    let max_height = usage(cfg.get_or("max_height", ParserConfig::default().max_height))?;
    let split = cfg.raw("split").unwrap_or("test").to_string();
    let parser = load_parser(&model, max_height)?;
    let (trees, units) = treebank_with_units(&treebank, &units)?;
    let examples = parser_examples(&trees, &units)?;
    let mut report = Report::default();
    evaluate_parser(&parser, &examples, &split, &mut report)?;
    Ok(Some(report))
}

fn load_captioner(dir: &Path) -> Result<(Captioner, Vocabulary)> {
    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    let cap = Captioner::from_checkpoint(&load_checkpoint(&dir.join(CAPTIONER_CKPT))?, &vocab)?;
    Ok((cap, vocab))
}

fn caption_all(cap: &Captioner, vocab: &Vocabulary, records: &[CaptionRecord], max_len: usize) -> Result<Vec<Vec<String>>> {
    records
        .iter()
        .map(|r| {
            if r.features.len() != cap.context_dim() {
                return Err(Error::contract(format!(
                    "record `{}` has {} features, the captioner expects {}",
                    r.id,
                    r.features.len(),
                    cap.context_dim()
                )));
            }
            let ids = cap.caption(&r.features, max_len)?;
            Ok(vocab.decode(&ids).into_iter().map(str::to_string).collect())
        })
        .collect()
}

fn bleu_rows(report: &mut Report, cands: &[Vec<String>], refs: &[Vec<Vec<String>>], split: &str) -> Result<()> {
    let b = bleu_score(cands, refs, 4)?;
    for (n, s) in b.scores.iter().enumerate() {
        report.push(&format!("bleu_{}", n + 1), split, *s);
    }
    report.push("brevity_penalty", split, b.brevity_penalty);
    Ok(())
}

fn train_captioner_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let seed = usage(cfg.seed())?;
    let captions = usage(cfg.input_file("captions"))?;
    let embeddings = usage(cfg.optional_input_file("embeddings"))?;
    let model_dir = usage(cfg.output_dir("model"))?;
    let base = CaptionerConfig::default();
    let c_cfg = usage((|| {
        Ok(CaptionerConfig {
            d: cfg.get_or("d", base.d)?,
            hidden: cfg.get_or("hidden", base.hidden)?,
            max_len: cfg.get_or("max_len", base.max_len)?,
            train: train_settings(cfg, base.train, seed)?,
        })
    })())?;

    let records = parse_captions(&read(&captions)?)?;
    let first = records
        .first()
        .ok_or_else(|| Error::contract("caption file has no records"))?;
    let vocab = caption_vocabulary(&records);
    let mut cap = Captioner::new(&c_cfg, first.features.len(), &vocab, seed)?;
    let mut report = Report::default();
    if let Some(p) = &embeddings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = load_embeddings(p, &vocab, c_cfg.d, &mut rng)?;
        report.push("embeddings_covered", "all", table.covered as f64);
        cap.store.assign(cap.decoder.embed, table.matrix)?;
    }
    let (cap, hist) = fit_captioner(cap, &records, &vocab, &c_cfg.train)?;
    save_checkpoint(&cap.store, &model_dir.join(CAPTIONER_CKPT))?;
    vocab.save(&model_dir.join(VOCAB_FILE))?;

    report.push("captioner_loss_first", "train", hist.first().unwrap_or(f64::NAN));
    report.push("captioner_loss_last", "train", hist.last().unwrap_or(f64::NAN));
    let cands = caption_all(&cap, &vocab, &records, c_cfg.max_len)?;
    let refs: Vec<Vec<Vec<String>>> = records.iter().map(|r| r.references.clone()).collect();
    bleu_rows(&mut report, &cands, &refs, "train")?;
    Ok(Some(report))
}

fn caption_cmd(cfg: &RunConfig, out: &mut dyn Write) -> std::result::Result<Option<Report>, Failure> {
    let model = usage(cfg.input_dir("model"))?;
    let captions = usage(cfg.input_file("captions"))?;
    let max_len = usage(cfg.get_or("max_len", CaptionerConfig::default().max_len))?;
    let out_path = usage(cfg.output_file("out"))?;
    let (cap, vocab) = load_captioner(&model)?;
    let records = parse_captions(&read(&captions)?)?;
    let cands = caption_all(&cap, &vocab, &records, max_len)?;
    let mut text = String::new();
    for (r, c) in records.iter().zip(&cands) {
        text.push_str(&format!("{}\t{}\n", r.id, c.join(" ")));
    }
    match out_path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    let mut report = Report::default();
    report.push("captions", "all", records.len() as f64);
    Ok(cfg.raw("report").map(|_| report))
}

/// `id<TAB>caption` lines.
pub fn parse_candidates(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, cap) = line.split_once('\t').ok_or_else(|| Error::Ingest {
            line: i + 1,
            message: "expected `id<TAB>caption`".into(),
        })?;
        out.push((id.to_string(), cap.split_whitespace().map(str::to_string).collect()));
    }
    Ok(out)
}

fn eval_bleu_cmd(cfg: &RunConfig) -> std::result::Result<Option<Report>, Failure> {
    let candidates = usage(cfg.input_file("candidates"))?;
    let captions = usage(cfg.input_file("captions"))?;
    let split = cfg.raw("split").unwrap_or("test").to_string();
    let cands = parse_candidates(&read(&candidates)?)?;
    let records = parse_captions(&read(&captions)?)?;
    let by_id: std::collections::HashMap<&str, &CaptionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut hyps = Vec::with_capacity(cands.len());
    let mut refs = Vec::with_capacity(cands.len());
    for (i, (id, c)) in cands.iter().enumerate() {
        let rec = by_id.get(id.as_str()).ok_or_else(|| Error::Ingest {
            line: i + 1,
            message: format!("candidate `{id}` has no caption record"),
        })?;
        hyps.push(c.clone());
        refs.push(rec.references.clone());
    }
    let mut report = Report::default();
    bleu_rows(&mut report, &hyps, &refs, &split)?;
    Ok(Some(report))
}

fn check_gradients_cmd(
    cfg: &RunConfig,
    report_path: Option<&Path>,
    out: &mut dyn Write,
) -> std::result::Result<Option<Report>, Failure> {
    let seed = usage(cfg.seed())?;
    let mut report = Report::default();
    let mut failed = Vec::new();
    for (block, r) in gradient_suite(seed)? {
        info!("{block}: {r}");
        report.push("max_rel_error", block, r.max_rel_error());
        report.push("coords_checked", block, r.checked as f64);
        if !r.passed() {
            failed.push(block);
        }
    }
    if failed.is_empty() {
        return Ok(Some(report));
    }
    emit_report(&report, report_path, out)?;
    Err(Failure::Data(Error::contract(format!(
        "gradient check exceeded tolerance for {}",
        failed.join(", ")
    ))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_to(std::iter::once("atpl").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn no_arguments_is_usage_error() {
        assert_eq!(run_capture(&[]).0, 2);
    }

    #[test]
    fn unknown_subcommand_and_flag() {
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["parse", "--bogus"]).0, 2);
    }

    #[test]
    fn parse_fixture() {
        let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/data/john.enc");
        let (code, out) = run_capture(&["parse", "--encodings", fixture]);
        assert_eq!(code, 0);
        assert_eq!(out, "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))\n");
    }

    #[test]
    fn missing_input_is_usage_error() {
        let (code, _) = run_capture(&["extract-u", "--model", "/nonexistent", "--input", "x", "--out", "y"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn candidates_format() {
        let c = parse_candidates("a\tthe dog\n\nb\t\n").unwrap();
        assert_eq!(c[0], ("a".to_string(), vec!["the".to_string(), "dog".to_string()]));
        assert!(c[1].1.is_empty());
        assert!(matches!(parse_candidates("no tab"), Err(Error::Ingest { line: 1, .. })));
    }
}
