//! POS tagger over unbinding vectors.
//!
//! A BLSTM reads `u_1..u_T`; token identity enters only through the
//! token-conditioned output weights, and
//! `z_{1,t} = softmax(W→(x_t) h→_t + W←(x_t) h←_t)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::labeler::{Labeler, LabelerDims};
use crate::tensor::{softmax, Tensor};
use crate::train::{train_loop, TrainConfig, TrainLog};

/// Bijection between tag names and dense ids, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::Config(format!("a tag set needs at least 2 tags, got {}", names.len())));
        }
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate tag `{n}`")));
            }
        }
        Ok(TagSet { names, index })
    }

    pub fn build<S: AsRef<str>>(tags: &[Vec<S>]) -> Result<Self> {
        let set: BTreeSet<&str> = tags.iter().flatten().map(AsRef::as_ref).collect();
        Self::from_names(set.into_iter().map(str::to_string).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Ids of a tag sequence; an unknown tag is an ingestion error at `line`.
    pub fn encode<S: AsRef<str>>(&self, tags: &[S], line: usize) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.get(t.as_ref()).ok_or_else(|| Error::Ingest {
                    line,
                    message: format!("unknown tag `{}`", t.as_ref()),
                })
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.names.join("\n") + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_names(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggerConfig {
    pub hidden: usize,
    pub inner: usize,
    pub train: TrainConfig,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            hidden: 32,
            inner: 16,
            train: TrainConfig {
                epochs: 20,
                batch_size: 8,
                lr: 5e-3,
                clip_norm: Some(5.0),
                seed: 0,
            },
        }
    }
}

/// One training or evaluation sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedExample {
    pub tokens: Vec<usize>,
    pub units: Vec<Tensor>,
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Tagger {
    pub store: ParamStore,
    pub labeler: Labeler,
}

const NAME: &str = "tagger";

impl Tagger {
    /// `d`: unbinding dimension, `vocab`: token count, `tags`: tag count.
    pub fn new(cfg: &TaggerConfig, d: usize, vocab: usize, tags: usize, seed: u64) -> Result<Self> {
        let dims = LabelerDims {
            input: d,
            hidden: cfg.hidden,
            inner: cfg.inner,
            symbols: vocab,
            classes: tags,
        };
        Self::with_dims(dims, seed)
    }

    fn with_dims(dims: LabelerDims, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let labeler = Labeler::new(&mut store, NAME, dims, &mut rng)?;
        Ok(Tagger { store, labeler })
    }

    pub fn from_checkpoint(loaded: &ParamStore) -> Result<Self> {
        let mut t = Self::with_dims(Labeler::infer_dims(loaded, NAME)?, 0)?;
        t.store.load_from(loaded)?;
        Ok(t)
    }

    pub fn num_tags(&self) -> usize {
        self.labeler.dims.classes
    }

    fn check(&self, units: &[Tensor], tokens: &[usize]) -> Result<()> {
        if units.len() != tokens.len() {
            return Err(Error::contract(format!(
                "{} unbinding vectors for {} tokens",
                units.len(),
                tokens.len()
            )));
        }
        Ok(())
    }

    /// Tag logits at every position, on graph `g` with parameters `store`.
    pub fn logits(&self, g: &mut Graph, store: &ParamStore, units: &[Tensor], tokens: &[usize]) -> Result<Vec<Var>> {
        self.check(units, tokens)?;
        let xs = Labeler::inputs(g, units);
        self.labeler.scores(g, store, &xs, tokens)
    }

    /// Per-position tag distributions.
    pub fn tag_forward(&self, units: &[Tensor], tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let logits = self.logits(&mut g, &self.store, units, tokens)?;
        Ok(logits.iter().map(|&l| softmax(g.value(l).data())).collect())
    }

    /// Argmax tags, ties to the lowest id.
    pub fn predict(&self, units: &[Tensor], tokens: &[usize]) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let logits = self.logits(&mut g, &self.store, units, tokens)?;
        Ok(logits.iter().map(|&l| g.value(l).argmax()).collect())
    }

    pub fn loss(&self, g: &mut Graph, store: &ParamStore, ex: &TaggedExample) -> Result<Var> {
        let logits = self.logits(g, store, &ex.units, &ex.tokens)?;
        if ex.tags.len() != logits.len() {
            return Err(Error::contract("gold tag count differs from sentence length"));
        }
        let losses = logits
            .iter()
            .zip(&ex.tags)
            .map(|(&l, &t)| g.cross_entropy(l, t))
            .collect::<Result<Vec<_>>>()?;
        g.add_all(&losses)
    }
}

pub fn train_tagger(tagger: Tagger, data: &[TaggedExample], cfg: &TrainConfig) -> Result<(Tagger, TrainLog)> {
    let p = tagger.num_tags();
    for (i, ex) in data.iter().enumerate() {
        if let Some(&bad) = ex.tags.iter().find(|&&t| t >= p) {
            return Err(Error::Ingest {
                line: i + 1,
                message: format!("tag id {bad} outside tag set of {p}"),
            });
        }
    }
    let mut tagger = tagger;
    let mut store = std::mem::take(&mut tagger.store);
    let log = train_loop(
        &mut store,
        data.len(),
        cfg,
        "tagger",
        |g, s, i| tagger.loss(g, s, &data[i]),
        |_, _, _| Ok(true),
    )?;
    tagger.store = store;
    Ok((tagger, log))
}

/// Fraction of positions whose argmax tag equals the gold tag.
pub fn eval_accuracy(tagger: &Tagger, data: &[TaggedExample]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for ex in data {
        let pred = tagger.predict(&ex.units, &ex.tokens)?;
        hit += pred.iter().zip(&ex.tags).filter(|(a, b)| a == b).count();
        total += ex.tags.len();
    }
    if total == 0 {
        return Err(Error::contract("accuracy of an empty dataset"));
    }
    Ok(hit as f64 / total as f64)
}

/// Counts of `(gold, predicted)` tag id pairs.
pub fn confusion(tagger: &Tagger, data: &[TaggedExample]) -> Result<BTreeMap<(usize, usize), usize>> {
    let mut m = BTreeMap::new();
    for ex in data {
        for (g, p) in ex.tags.iter().zip(tagger.predict(&ex.units, &ex.tokens)?) {
            *m.entry((*g, p)).or_insert(0) += 1;
        }
    }
    Ok(m)
}

/// `gold,predicted,count` rows with a header.
pub fn format_confusion_csv(m: &BTreeMap<(usize, usize), usize>, tags: &TagSet) -> String {
    let mut out = String::from("gold,predicted,count\n");
    for (&(g, p), &c) in m {
        let _ = writeln!(out, "{},{},{}", tags.name(g), tags.name(p), c);
    }
    out
}
