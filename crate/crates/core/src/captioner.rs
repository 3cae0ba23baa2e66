//! Caption generation: the TPR decoder driven directly by a precomputed
//! feature vector `v`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamStore, Var};
use crate::corpus::{CaptionRecord, Vocabulary};
use crate::decoder::{DecodeMode, DecoderConfig, DecoderParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::{train_loop, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptionerConfig {
    pub d: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub train: TrainConfig,
}

impl Default for CaptionerConfig {
    fn default() -> Self {
        CaptionerConfig {
            d: 16,
            hidden: 64,
            max_len: 16,
            train: TrainConfig {
                epochs: 40,
                batch_size: 8,
                lr: 5e-3,
                clip_norm: Some(5.0),
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Captioner {
    pub store: ParamStore,
    pub decoder: DecoderParams,
    pub eos: usize,
}

impl Captioner {
    pub fn new(cfg: &CaptionerConfig, context: usize, vocab: &Vocabulary, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let dcfg = DecoderConfig {
            d: cfg.d,
            hidden: cfg.hidden,
            context,
            vocab: vocab.len(),
        };
        let decoder = DecoderParams::new(&mut store, "cap", dcfg, &mut rng)?;
        Ok(Captioner {
            store,
            decoder,
            eos: vocab.eos(),
        })
    }

    pub fn from_checkpoint(loaded: &ParamStore, vocab: &Vocabulary) -> Result<Self> {
        let shape = |name: &str| -> Result<Vec<usize>> {
            match loaded.id(name) {
                Some(id) if loaded.value(id).rank() == 2 => Ok(loaded.value(id).shape().to_vec()),
                _ => Err(Error::Config(format!("checkpoint lacks matrix `{name}`"))),
            }
        };
        let embed = shape("cap.embed")?;
        let gate = shape("cap.lstm.wi")?;
        let attn = shape("cap.attn_s.w")?;
        if embed[1] != vocab.len() {
            return Err(Error::Config(format!(
                "checkpoint vocabulary size {} does not match vocabulary file ({})",
                embed[1],
                vocab.len()
            )));
        }
        let cfg = CaptionerConfig {
            d: embed[0],
            hidden: gate[0],
            ..CaptionerConfig::default()
        };
        let mut c = Self::new(&cfg, attn[0], vocab, 0)?;
        let copied = c.store.load_from(loaded)?;
        if copied != c.store.len() {
            return Err(Error::Config(format!("checkpoint covers {copied} of {} parameters", c.store.len())));
        }
        Ok(c)
    }

    pub fn context_dim(&self) -> usize {
        self.decoder.config.context
    }

    pub fn loss(&self, g: &mut Graph, store: &ParamStore, features: &[f64], ids: &[usize]) -> Result<Var> {
        let v = g.input(Tensor::vector(features));
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

    /// Greedy caption, without the end-of-sentence token.
    pub fn caption(&self, features: &[f64], max_len: usize) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let v = g.input(Tensor::vector(features));
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
}

/// Vocabulary over every reference caption.
pub fn caption_vocabulary(records: &[CaptionRecord]) -> Vocabulary {
    let refs: Vec<Vec<String>> = records.iter().flat_map(|r| r.references.iter().cloned()).collect();
    Vocabulary::build(&refs)
}

/// Trains on every (record, reference) pair.
pub fn train_captioner(
    records: &[CaptionRecord],
    vocab: &Vocabulary,
    cfg: &CaptionerConfig,
) -> Result<(Captioner, TrainLog)> {
    let first = records
        .first()
        .ok_or_else(|| Error::contract("captioner training needs at least one record"))?;
    let cap = Captioner::new(cfg, first.features.len(), vocab, cfg.train.seed)?;
    fit_captioner(cap, records, vocab, &cfg.train)
}

/// Trains an already initialized captioner.
pub fn fit_captioner(
    mut cap: Captioner,
    records: &[CaptionRecord],
    vocab: &Vocabulary,
    train: &TrainConfig,
) -> Result<(Captioner, TrainLog)> {
    let mut pairs: Vec<(&[f64], Vec<usize>)> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.features.len() != cap.context_dim() {
            return Err(Error::Ingest {
                line: i + 1,
                message: format!(
                    "record `{}` has {} features, the captioner expects {}",
                    r.id,
                    r.features.len(),
                    cap.context_dim()
                ),
            });
        }
        for reference in &r.references {
            pairs.push((&r.features, vocab.encode_strict(reference, i + 1)?));
        }
    }
    let mut store = std::mem::take(&mut cap.store);
    let log = train_loop(
        &mut store,
        pairs.len(),
        train,
        "captioner",
        |g, s, i| cap.loss(g, s, pairs[i].0, &pairs[i].1),
        |_, _, _| Ok(true),
    )?;
    cap.store = store;
    Ok((cap, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bleu_score, synthesize_features};

    #[test]
    fn learns_two_captions() {
        let sents: Vec<Vec<String>> = ["a dog runs", "the cat sleeps"]
            .iter()
            .map(|s| s.split(' ').map(str::to_string).collect())
            .collect();
        let vocab = Vocabulary::build(&sents);
        let feats = synthesize_features(&sents, &vocab, 8, 1);
        let records: Vec<CaptionRecord> = sents
            .iter()
            .zip(feats)
            .enumerate()
            .map(|(i, (s, f))| CaptionRecord {
                id: format!("r{i}"),
                features: f,
                references: vec![s.clone()],
            })
            .collect();
        let cfg = CaptionerConfig {
            d: 4,
            hidden: 8,
            max_len: 6,
            train: TrainConfig {
                epochs: 150,
                batch_size: 2,
                lr: 1e-2,
                clip_norm: Some(5.0),
                seed: 1,
            },
        };
        let (cap, log) = train_captioner(&records, &vocab, &cfg).unwrap();
        assert!(log.last().unwrap() < log.first().unwrap());
        let cands: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                let ids = cap.caption(&r.features, 6).unwrap();
                vocab.decode(&ids).into_iter().map(str::to_string).collect()
            })
            .collect();
        let refs: Vec<Vec<Vec<String>>> = records.iter().map(|r| r.references.clone()).collect();
        assert_eq!(cands, sents);
        assert_eq!(bleu_score(&cands, &refs, 4).unwrap().scores[0], 1.0);

        let mut buf = Vec::new();
        crate::autodiff::write_checkpoint(&cap.store, &mut buf).unwrap();
        let re = Captioner::from_checkpoint(&crate::autodiff::read_checkpoint(&buf[..]).unwrap(), &vocab).unwrap();
        assert_eq!(re.context_dim(), 8);
        assert_eq!(re.caption(&records[0].features, 6).unwrap(), cap.caption(&records[0].features, 6).unwrap());
    }

    #[test]
    fn oov_reference_is_ingest_error() {
        let vocab = Vocabulary::build(&[vec!["a"]]);
        let records = vec![CaptionRecord {
            id: "x".into(),
            features: vec![0.0; 4],
            references: vec![vec!["zzz".into()]],
        }];
        let err = train_captioner(&records, &vocab, &CaptionerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
    }
}
