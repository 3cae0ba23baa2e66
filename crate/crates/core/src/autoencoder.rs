//! Sentence autoencoder: an LSTM encoder compresses the sentence into its
//! final hidden state, and the TPR decoder reconstructs the same sentence
//! from it. Once trained, teacher-forced decoding of a sentence yields its
//! unbinding vectors `u_1..u_T`.

use std::fmt::Write as _;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::blocks::LstmCell;
use crate::corpus::Vocabulary;
use crate::decoder::{DecodeMode, DecoderConfig, DecoderParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::{train_loop, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoencoderConfig {
    pub d: usize,
    /// Decoder LSTM hidden size.
    pub hidden: usize,
    /// Encoder hidden size, which is also the context dimension.
    pub context: usize,
    /// Encoder input embedding size.
    pub embed: usize,
    /// Greedy reconstruction stops after this many tokens.
    pub max_len: usize,
    pub train: TrainConfig,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            d: 16,
            hidden: 64,
            context: 64,
            embed: 32,
            max_len: 16,
            train: TrainConfig {
                epochs: 60,
                batch_size: 8,
                lr: 5e-3,
                clip_norm: Some(5.0),
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub store: ParamStore,
    pub enc_embed: ParamId,
    pub encoder: LstmCell,
    pub decoder: DecoderParams,
    pub eos: usize,
}

impl Autoencoder {
    pub fn new(cfg: &AutoencoderConfig, vocab: &Vocabulary, seed: u64) -> Result<Self> {
        Self::with_vocab_size(cfg, vocab.len(), vocab.eos(), seed)
    }

    fn with_vocab_size(cfg: &AutoencoderConfig, v: usize, eos: usize, seed: u64) -> Result<Self> {
        if cfg.embed == 0 || cfg.context == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let enc_embed = store.add("enc.embed", Tensor::glorot(cfg.embed, v, &mut rng))?;
        let encoder = LstmCell::new(&mut store, "enc.lstm", cfg.embed, cfg.context, &mut rng)?;
        let dcfg = DecoderConfig {
            d: cfg.d,
            hidden: cfg.hidden,
            context: cfg.context,
            vocab: v,
        };
        let decoder = DecoderParams::new(&mut store, "dec", dcfg, &mut rng)?;
        Ok(Autoencoder {
            store,
            enc_embed,
            encoder,
            decoder,
            eos,
        })
    }

    /// Rebuilds the model around a loaded checkpoint, reading dimensions
    /// from the parameter shapes.
    pub fn from_checkpoint(loaded: &ParamStore, vocab: &Vocabulary) -> Result<Self> {
        let shape = |name: &str| -> Result<Vec<usize>> {
            loaded
                .id(name)
                .map(|id| loaded.value(id).shape().to_vec())
                .ok_or_else(|| Error::Config(format!("checkpoint lacks parameter `{name}`")))
        };
        let enc = shape("enc.embed")?;
        let dec = shape("dec.embed")?;
        let enc_gate = shape("enc.lstm.wi")?;
        let dec_gate = shape("dec.lstm.wi")?;
        if enc.len() != 2 || dec.len() != 2 || enc_gate.len() != 2 || dec_gate.len() != 2 {
            return Err(Error::Config("checkpoint parameters have unexpected rank".into()));
        }
        if enc[1] != vocab.len() || dec[1] != vocab.len() {
            return Err(Error::Config(format!(
                "checkpoint vocabulary size {} does not match vocabulary file ({})",
                dec[1],
                vocab.len()
            )));
        }
        let cfg = AutoencoderConfig {
            d: dec[0],
            hidden: dec_gate[0],
            context: enc_gate[0],
            embed: enc[0],
            ..AutoencoderConfig::default()
        };
        let mut ae = Self::new(&cfg, vocab, 0)?;
        let copied = ae.store.load_from(loaded)?;
        if copied != ae.store.len() {
            return Err(Error::Config(format!(
                "checkpoint covers {copied} of {} parameters",
                ae.store.len()
            )));
        }
        Ok(ae)
    }

    pub fn config(&self) -> DecoderConfig {
        self.decoder.config
    }

    /// Final encoder hidden state.
    pub fn encode(&self, g: &mut Graph, ids: &[usize]) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::contract("cannot encode an empty sentence"));
        }
        let we = g.param(&self.store, self.enc_embed);
        let xs = ids
            .iter()
            .map(|&i| g.select_column(we, i))
            .collect::<Result<Vec<_>>>()?;
        let hs = self.encoder.run(g, &self.store, &xs)?;
        Ok(*hs.last().expect("non-empty"))
    }

    fn loss_with(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Result<Var> {
        // `store` is the live training store; `self.store` only provides structure.
        let we = g.param(store, self.enc_embed);
        let xs = ids
            .iter()
            .map(|&i| g.select_column(we, i))
            .collect::<Result<Vec<_>>>()?;
        let hs = self.encoder.run(g, store, &xs)?;
        let v = *hs.last().ok_or_else(|| Error::contract("cannot encode an empty sentence"))?;
        let out = self.decoder.decode(
            g,
            store,
            v,
            DecodeMode::TeacherForced {
                gold: ids,
                eos: Some(self.eos),
            },
        )?;
        Ok(out.loss.expect("teacher forcing yields a loss"))
    }

    /// Teacher-forced reconstruction cross-entropy, summed over the tokens
    /// and the end-of-sentence step.
    pub fn loss(&self, g: &mut Graph, ids: &[usize]) -> Result<Var> {
        self.loss_with(g, &self.store, ids)
    }

    /// Greedy reconstruction from the encoding of `ids`.
    pub fn reconstruct(&self, ids: &[usize], max_len: usize) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let v = self.encode(&mut g, ids)?;
        let out = self.decoder.decode(
            &mut g,
            &self.store,
            v,
            DecodeMode::Greedy {
                max_len,
                eos: Some(self.eos),
            },
        )?;
        Ok(out.tokens)
    }

    /// `u_1..u_T` from teacher-forced decoding of the sentence itself. The
    /// end-of-sentence step is never included.
    pub fn extract(&self, id: &str, ids: &[usize]) -> Result<UnbindingSequence> {
        if ids.len() > self.decoder.config.d {
            warn!(
                "sentence `{id}` has {} tokens, more than d = {}; unbinding is approximate",
                ids.len(),
                self.decoder.config.d
            );
        }
        let mut g = Graph::new();
        let v = self.encode(&mut g, ids)?;
        let out = self.decoder.decode(&mut g, &self.store, v, DecodeMode::TeacherForced { gold: ids, eos: None })?;
        Ok(UnbindingSequence {
            id: id.to_string(),
            units: out.units,
        })
    }
}

/// Encodes every sentence, failing on the first out-of-vocabulary token
/// with its 1-based line number.
pub fn encode_corpus<S: AsRef<str>>(vocab: &Vocabulary, corpus: &[Vec<S>]) -> Result<Vec<Vec<usize>>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.is_empty() {
                return Err(Error::Ingest {
                    line: i + 1,
                    message: "empty sentence".into(),
                });
            }
            vocab.encode_strict(s, i + 1)
        })
        .collect()
}

pub fn train_autoencoder<S: AsRef<str>>(
    corpus: &[Vec<S>],
    vocab: &Vocabulary,
    cfg: &AutoencoderConfig,
) -> Result<(Autoencoder, TrainLog)> {
    let data = encode_corpus(vocab, corpus)?;
    train_autoencoder_ids(&data, vocab, cfg, |_, _, _| Ok(true))
}

/// Trains on pre-encoded sentences. `on_epoch(epoch, mean_loss, model)` can
/// stop training early by returning `false`.
pub fn train_autoencoder_ids<E>(
    data: &[Vec<usize>],
    vocab: &Vocabulary,
    cfg: &AutoencoderConfig,
    on_epoch: E,
) -> Result<(Autoencoder, TrainLog)>
where
    E: FnMut(usize, f64, &Autoencoder) -> Result<bool>,
{
    fit_autoencoder(Autoencoder::new(cfg, vocab, cfg.train.seed)?, data, &cfg.train, on_epoch)
}

/// Trains an already initialized model, for instance one whose decoder
/// embeddings were loaded from a word-vector file.
pub fn fit_autoencoder<E>(
    mut ae: Autoencoder,
    data: &[Vec<usize>],
    train: &TrainConfig,
    mut on_epoch: E,
) -> Result<(Autoencoder, TrainLog)>
where
    E: FnMut(usize, f64, &Autoencoder) -> Result<bool>,
{
    let mut store = std::mem::take(&mut ae.store);
    let log = {
        let shape = &ae;
        train_loop(
            &mut store,
            data.len(),
            train,
            "autoencoder",
            |g, s, i| shape.loss_with(g, s, &data[i]),
            |epoch, loss, s| {
                let snapshot = Autoencoder {
                    store: s.clone(),
                    ..shape.clone()
                };
                on_epoch(epoch, loss, &snapshot)
            },
        )?
    };
    ae.store = store;
    Ok((ae, log))
}

/// Fraction of gold positions whose greedily reconstructed token matches.
/// Missing positions count as errors; surplus tokens are ignored.
pub fn reconstruction_accuracy(ae: &Autoencoder, data: &[Vec<usize>], max_len: usize) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for ids in data {
        let out = ae.reconstruct(ids, max_len)?;
        hit += ids.iter().zip(&out).filter(|(a, b)| a == b).count();
        total += ids.len();
    }
    if total == 0 {
        return Err(Error::contract("reconstruction accuracy of an empty corpus"));
    }
    Ok(hit as f64 / total as f64)
}

/// Unbinding vectors of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbindingSequence {
    pub id: String,
    pub units: Vec<Tensor>,
}

impl UnbindingSequence {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.units.first().map_or(0, Tensor::len)
    }
}

/// One record per line: `id<TAB>T<TAB>` followed by `T·d` space-separated
/// floats, `u_1` first.
pub fn format_unbindings(seqs: &[UnbindingSequence]) -> String {
    let mut out = String::new();
    for s in seqs {
        let vals: Vec<String> = s
            .units
            .iter()
            .flat_map(|u| u.data().iter().map(|x| x.to_string()))
            .collect();
        let _ = writeln!(out, "{}\t{}\t{}", s.id, s.len(), vals.join(" "));
    }
    out
}

pub fn parse_unbindings(text: &str) -> Result<Vec<UnbindingSequence>> {
    let mut out: Vec<UnbindingSequence> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Ingest { line: i + 1, message };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, t, vals] = fields.as_slice() else {
            return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let t: usize = t.trim().parse().map_err(|_| bad(format!("bad length `{t}`")))?;
        let vals: Vec<f64> = vals
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("malformed float `{s}`"))))
            .collect::<Result<_>>()?;
        if t == 0 || vals.len() % t != 0 {
            return Err(bad(format!("{} values do not split into {t} vectors", vals.len())));
        }
        let d = vals.len() / t;
        if let Some(prev) = out.first() {
            if prev.dim() != d {
                return Err(bad(format!("vector dimension {d}, expected {}", prev.dim())));
            }
        }
        out.push(UnbindingSequence {
            id: id.to_string(),
            units: vals.chunks(d).map(Tensor::vector).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::GradCheckConfig;

    fn tiny_cfg(epochs: usize) -> AutoencoderConfig {
        AutoencoderConfig {
            d: 4,
            hidden: 8,
            context: 8,
            embed: 6,
            max_len: 6,
            train: TrainConfig {
                epochs,
                batch_size: 1,
                lr: 1e-2,
                clip_norm: Some(5.0),
                seed: 3,
            },
        }
    }

    fn vocab() -> Vocabulary {
        Vocabulary::build(&[vec!["a", "b", "c", "d"]])
    }

    #[test]
    fn initial_loss_is_near_uniform() {
        let v = vocab();
        let ae = Autoencoder::new(&tiny_cfg(1), &v, 0).unwrap();
        let ids = v.encode_strict(&["a", "b", "c"], 1).unwrap();
        let mut g = Graph::new();
        let loss = ae.loss(&mut g, &ids).unwrap();
        let uniform = 4.0 * (v.len() as f64).ln();
        let l = g.value(loss).item();
        assert!((l - uniform).abs() < 0.5, "loss {l} vs {uniform}");
    }

    #[test]
    fn overfits_one_short_sentence() {
        let v = vocab();
        let data = vec![v.encode_strict(&["a", "b"], 1).unwrap()];
        let (ae, log) = train_autoencoder_ids(&data, &v, &tiny_cfg(200), |_, _, _| Ok(true)).unwrap();
        assert!(log.last().unwrap() < log.first().unwrap());
        assert_eq!(reconstruction_accuracy(&ae, &data, 6).unwrap(), 1.0);
        assert_eq!(ae.reconstruct(&data[0], 6).unwrap(), data[0]);
    }

    #[test]
    fn oov_token_names_line() {
        let v = vocab();
        let err = train_autoencoder(&[vec!["a"], vec!["zebra"]], &v, &tiny_cfg(1)).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("zebra"));
    }

    #[test]
    fn extraction_shape_and_determinism() {
        let v = vocab();
        let ae = Autoencoder::new(&tiny_cfg(1), &v, 1).unwrap();
        let one = ae.extract("s", &[v.get("a").unwrap()]).unwrap();
        assert_eq!(one.len(), 1);
        let ids = v.encode_strict(&["a", "b", "c"], 1).unwrap();
        let x = ae.extract("s", &ids).unwrap();
        let y = ae.extract("s", &ids).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.len(), 3);
        assert_eq!(x.dim(), 4);
        let other = ae.extract("t", &v.encode_strict(&["c", "a", "d"], 1).unwrap()).unwrap();
        assert!(x.units.iter().zip(&other.units).any(|(a, b)| a.max_abs_diff(b) > 0.0));
    }

    #[test]
    fn unbinding_file_round_trip() {
        let v = vocab();
        let ae = Autoencoder::new(&tiny_cfg(1), &v, 2).unwrap();
        let seqs = vec![
            ae.extract("s1", &[0, 1, 2]).unwrap(),
            ae.extract("s2", &[3]).unwrap(),
        ];
        let text = format_unbindings(&seqs);
        assert_eq!(parse_unbindings(&text).unwrap(), seqs);
        assert!(parse_unbindings("x\t2\t1 2 3\n").is_err());
        assert!(parse_unbindings("x\t1\t1 q\n").is_err());
    }

    #[test]
    fn checkpoint_reload_rebuilds_model() {
        let v = vocab();
        let ae = Autoencoder::new(&tiny_cfg(1), &v, 5).unwrap();
        let mut buf = Vec::new();
        crate::autodiff::write_checkpoint(&ae.store, &mut buf).unwrap();
        let loaded = crate::autodiff::read_checkpoint(&buf[..]).unwrap();
        let re = Autoencoder::from_checkpoint(&loaded, &v).unwrap();
        assert_eq!(re.config(), ae.config());
        assert_eq!(re.extract("s", &[0, 2]).unwrap(), ae.extract("s", &[0, 2]).unwrap());
    }

    #[test]
    fn end_to_end_gradient_check() {
        let v = vocab();
        let ae = Autoencoder::new(&tiny_cfg(1), &v, 7).unwrap();
        let mut store = ae.store.clone();
        let ids = vec![0, 2, 1];
        let report = crate::autodiff::finite_diff_check(
            &mut store,
            |g, s| ae.loss_with(g, s, &ids),
            GradCheckConfig {
                max_coords: 80,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}
