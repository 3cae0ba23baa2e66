//! Layered segmenter and substring classifier.
//!
//! Every layer `k >= 2` owns a segmenter (2 classes) and a classifier (one
//! class per category, POS tags included), each a BLSTM over the unbinding
//! vectors with output weights conditioned on the POS tag of the position.
//! The segmenter scores positions directly at layer 2 and averages scores
//! over each layer-`(k-1)` segment above it; the classifier averages over
//! each layer-`k` segment. Layers above the tallest training tree reuse the
//! top trained layer.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamStore, Var};
use crate::corpus::ParseTree;
use crate::error::{Error, Result};
use crate::labeler::{span_means, Labeler, LabelerDims};
use crate::parser::build::build_tree;
use crate::parser::layers::{code_spans, derive_gold_layers, normalize_code, LayerEncoding};
use crate::tagger::TagSet;
use crate::tensor::Tensor;
use crate::train::{train_loop, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParserConfig {
    pub hidden: usize,
    pub inner: usize,
    /// Inference stops growing the tree at this layer.
    pub max_height: usize,
    pub train: TrainConfig,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            hidden: 32,
            inner: 16,
            max_height: 12,
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
pub struct ParserLayer {
    pub segmenter: Labeler,
    pub classifier: Labeler,
}

/// A gold tree with the unbinding vectors of its sentence.
#[derive(Debug, Clone)]
pub struct ParserExample {
    pub tree: ParseTree,
    pub encoding: LayerEncoding,
    pub units: Vec<Tensor>,
}

impl ParserExample {
    pub fn new(tree: ParseTree, units: Vec<Tensor>) -> Result<Self> {
        let encoding = derive_gold_layers(&tree)?;
        if units.len() != encoding.len() {
            return Err(Error::contract(format!(
                "{} unbinding vectors for a {}-token tree",
                units.len(),
                encoding.len()
            )));
        }
        Ok(ParserExample { tree, encoding, units })
    }
}

#[derive(Debug, Clone)]
pub struct Parser {
    pub store: ParamStore,
    pub pos: TagSet,
    pub categories: TagSet,
    /// `layers[k - 2]` serves layer `k`.
    pub layers: Vec<ParserLayer>,
    pub max_height: usize,
}

const NAME: &str = "parser";

fn seg_name(k: usize) -> String {
    format!("{NAME}.seg{k}")
}

fn cls_name(k: usize) -> String {
    format!("{NAME}.cls{k}")
}

impl Parser {
    /// A parser with layers `2..=top_layer`.
    pub fn new(
        cfg: &ParserConfig,
        d: usize,
        pos: TagSet,
        categories: TagSet,
        top_layer: usize,
        seed: u64,
    ) -> Result<Self> {
        if top_layer < 2 {
            return Err(Error::Config(format!("parser needs at least layer 2, got top layer {top_layer}")));
        }
        if cfg.max_height < 2 {
            return Err(Error::Config("max height must be at least 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let dims = |classes| LabelerDims {
            input: d,
            hidden: cfg.hidden,
            inner: cfg.inner,
            symbols: pos.len(),
            classes,
        };
        let mut layers = Vec::new();
        for k in 2..=top_layer {
            layers.push(ParserLayer {
                segmenter: Labeler::new(&mut store, &seg_name(k), dims(2), &mut rng)?,
                classifier: Labeler::new(&mut store, &cls_name(k), dims(categories.len()), &mut rng)?,
            });
        }
        Ok(Parser {
            store,
            pos,
            categories,
            layers,
            max_height: cfg.max_height,
        })
    }

    pub fn from_checkpoint(loaded: &ParamStore, pos: TagSet, categories: TagSet, max_height: usize) -> Result<Self> {
        let seg = Labeler::infer_dims(loaded, &seg_name(2))?;
        let cls = Labeler::infer_dims(loaded, &cls_name(2))?;
        if seg.symbols != pos.len() || cls.classes != categories.len() {
            return Err(Error::Config(format!(
                "checkpoint expects {} POS tags and {} categories, label files give {} and {}",
                seg.symbols,
                cls.classes,
                pos.len(),
                categories.len()
            )));
        }
        let mut top = 2;
        while loaded.id(&format!("{}.blstm.fwd.wi", seg_name(top + 1))).is_some() {
            top += 1;
        }
        let cfg = ParserConfig {
            hidden: seg.hidden,
            inner: seg.inner,
            max_height,
            ..ParserConfig::default()
        };
        let mut p = Self::new(&cfg, seg.input, pos, categories, top, 0)?;
        let copied = p.store.load_from(loaded)?;
        if copied != p.store.len() {
            return Err(Error::Config(format!("checkpoint covers {copied} of {} parameters", p.store.len())));
        }
        Ok(p)
    }

    /// Highest layer with its own parameters.
    pub fn top_layer(&self) -> usize {
        self.layers.len() + 1
    }

    fn layer(&self, k: usize) -> &ParserLayer {
        &self.layers[(k.max(2) - 2).min(self.layers.len() - 1)]
    }

    pub fn pos_ids<S: AsRef<str>>(&self, tags: &[S]) -> Result<Vec<usize>> {
        self.pos.encode(tags, 0).map_err(|e| match e {
            Error::Ingest { message, .. } => Error::contract(format!("parser: {message}")),
            other => other,
        })
    }

    /// Segmenter scores at layer `k`; `prev` holds the layer-`(k-1)`
    /// segments and is ignored at layer 2.
    fn seg_scores(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        k: usize,
        xs: &[Var],
        pos: &[usize],
        prev: &[(usize, usize)],
    ) -> Result<Vec<Var>> {
        let raw = self.layer(k).segmenter.scores(g, store, xs, pos)?;
        if k == 2 {
            Ok(raw)
        } else {
            span_means(g, &raw, prev)
        }
    }

    fn cls_scores(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        k: usize,
        xs: &[Var],
        pos: &[usize],
        spans: &[(usize, usize)],
    ) -> Result<Vec<Var>> {
        let raw = self.layer(k).classifier.scores(g, store, xs, pos)?;
        span_means(g, &raw, spans)
    }

    fn check_lengths(units: &[Tensor], pos: &[usize]) -> Result<()> {
        if units.is_empty() || units.len() != pos.len() {
            return Err(Error::contract(format!(
                "{} unbinding vectors for {} POS tags",
                units.len(),
                pos.len()
            )));
        }
        Ok(())
    }

    /// Raw layer-2 code: per-position argmax (ties to class 0).
    pub fn segment_layer2(&self, units: &[Tensor], pos: &[usize]) -> Result<Vec<u8>> {
        Self::check_lengths(units, pos)?;
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, units);
        let s = self.seg_scores(&mut g, &self.store, 2, &xs, pos, &[])?;
        Ok(s.iter().map(|&v| g.value(v).argmax() as u8).collect())
    }

    /// Raw layer-`k` code for `k >= 3`, constant on each segment of `prev`.
    pub fn segment_layerk(&self, units: &[Tensor], pos: &[usize], prev: &[u8], k: usize) -> Result<Vec<u8>> {
        Self::check_lengths(units, pos)?;
        if k < 3 {
            return Err(Error::contract(format!("segment_layerk needs k >= 3, got {k}")));
        }
        if prev.len() != pos.len() {
            return Err(Error::contract("previous-layer code length differs from sentence length"));
        }
        let spans = code_spans(prev)?;
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, units);
        let s = self.seg_scores(&mut g, &self.store, k, &xs, pos, &spans)?;
        Ok(s.iter().map(|&v| g.value(v).argmax() as u8).collect())
    }

    /// Category id per position, constant on each segment of `code`.
    pub fn classify_layer(&self, units: &[Tensor], pos: &[usize], code: &[u8], k: usize) -> Result<Vec<usize>> {
        Self::check_lengths(units, pos)?;
        if code.len() != pos.len() {
            return Err(Error::contract("layer code length differs from sentence length"));
        }
        let spans = code_spans(code)?;
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, units);
        let s = self.cls_scores(&mut g, &self.store, k, &xs, pos, &spans)?;
        Ok(s.iter().map(|&v| g.value(v).argmax()).collect())
    }

    /// Teacher-forced loss over all layers of a gold tree: per-position
    /// cross-entropy of the segmenter and classifier outputs.
    pub fn loss(&self, g: &mut Graph, store: &ParamStore, ex: &ParserExample) -> Result<Var> {
        let enc = &ex.encoding;
        let pos = self.pos_ids(enc.pos())?;
        Self::check_lengths(&ex.units, &pos)?;
        let xs = Labeler::inputs(g, &ex.units);
        let mut losses = Vec::new();
        for k in 2..=enc.height() {
            let prev = enc.segments(k - 1);
            let spans = enc.segments(k);
            let seg = self.seg_scores(g, store, k, &xs, &pos, &prev)?;
            for (&s, &bit) in seg.iter().zip(enc.code(k)) {
                losses.push(g.cross_entropy(s, bit as usize)?);
            }
            let cats = self.categories.encode(enc.column(k), 0).map_err(|e| match e {
                Error::Ingest { message, .. } => Error::contract(format!("parser: {message}")),
                other => other,
            })?;
            let cls = self.cls_scores(g, store, k, &xs, &pos, &spans)?;
            for (&s, &c) in cls.iter().zip(&cats) {
                losses.push(g.cross_entropy(s, c)?);
            }
        }
        if losses.is_empty() {
            return Err(Error::contract("a tree of height 1 has no layers to learn"));
        }
        g.add_all(&losses)
    }

    fn columns_for(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&c| self.categories.name(c).to_string()).collect()
    }

    /// Bottom-up parse: predicts each layer's code from the one below until
    /// a layer is a single segment, forcing one at `max_height`.
    pub fn parse<S: AsRef<str>, P: AsRef<str>>(&self, tokens: &[S], pos_tags: &[P], units: &[Tensor]) -> Result<ParseResult> {
        let pos = self.pos_ids(pos_tags)?;
        Self::check_lengths(units, &pos)?;
        if tokens.len() != pos.len() {
            return Err(Error::contract("token and POS tag counts differ"));
        }
        let n = pos.len();
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, units);
        let mut columns = vec![pos_tags.iter().map(|p| p.as_ref().to_string()).collect::<Vec<_>>()];
        let mut codes: Vec<Vec<u8>> = Vec::new();
        let mut prev: Vec<(usize, usize)> = (0..n).map(|t| (t, t + 1)).collect();
        for k in 2..=self.max_height {
            let code = if k == self.max_height {
                vec![0; n]
            } else {
                let s = self.seg_scores(&mut g, &self.store, k, &xs, &pos, &prev)?;
                normalize_code(&s.iter().map(|&v| g.value(v).argmax() as u8).collect::<Vec<_>>())
            };
            let spans = code_spans(&code)?;
            let cls = self.cls_scores(&mut g, &self.store, k, &xs, &pos, &spans)?;
            columns.push(self.columns_for(&cls.iter().map(|&v| g.value(v).argmax()).collect::<Vec<_>>()));
            codes.push(code);
            if spans.len() == 1 {
                break;
            }
            prev = spans;
        }
        if codes.last().map(|c| c.iter().all(|&b| b == 0)) != Some(true) {
            warn!("parse did not converge below the maximum height");
        }
        let height = columns.len();
        let bracketed = build_tree(tokens, &columns, &codes, height)?;
        Ok(ParseResult {
            bracketed,
            columns,
            codes,
        })
    }

    /// Parse with given layer codes (`codes[k-2]` for layer `k`); only the
    /// categories are predicted.
    pub fn parse_with_codes<S: AsRef<str>, P: AsRef<str>>(
        &self,
        tokens: &[S],
        pos_tags: &[P],
        units: &[Tensor],
        codes: &[Vec<u8>],
    ) -> Result<ParseResult> {
        let pos = self.pos_ids(pos_tags)?;
        Self::check_lengths(units, &pos)?;
        if tokens.len() != pos.len() {
            return Err(Error::contract("token and POS tag counts differ"));
        }
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, units);
        let mut columns = vec![pos_tags.iter().map(|p| p.as_ref().to_string()).collect::<Vec<_>>()];
        for (i, code) in codes.iter().enumerate() {
            if code.len() != pos.len() {
                return Err(Error::contract(format!("layer {} code has the wrong length", i + 2)));
            }
            let spans = code_spans(code)?;
            let cls = self.cls_scores(&mut g, &self.store, i + 2, &xs, &pos, &spans)?;
            columns.push(self.columns_for(&cls.iter().map(|&v| g.value(v).argmax()).collect::<Vec<_>>()));
        }
        let height = columns.len();
        let bracketed = build_tree(tokens, &columns, codes, height)?;
        Ok(ParseResult {
            bracketed,
            columns,
            codes: codes.to_vec(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseResult {
    pub bracketed: String,
    pub columns: Vec<Vec<String>>,
    pub codes: Vec<Vec<u8>>,
}

/// POS and category label sets covering a treebank.
pub fn label_sets(trees: &[ParseTree]) -> Result<(TagSet, TagSet)> {
    let encs = trees.iter().map(derive_gold_layers).collect::<Result<Vec<_>>>()?;
    let pos: Vec<Vec<String>> = encs.iter().map(|e| e.pos().to_vec()).collect();
    let cats: Vec<Vec<String>> = encs.iter().flat_map(|e| e.columns.iter().cloned()).collect();
    Ok((TagSet::build(&pos)?, TagSet::build(&cats)?))
}

/// Trains a fresh parser with one layer per level of the tallest tree.
pub fn train_parser(
    data: &[ParserExample],
    pos: TagSet,
    categories: TagSet,
    cfg: &ParserConfig,
) -> Result<(Parser, TrainLog)> {
    let usable: Vec<&ParserExample> = data.iter().filter(|ex| ex.encoding.height() >= 2).collect();
    if usable.len() < data.len() {
        warn!("skipping {} trees of height 1", data.len() - usable.len());
    }
    let top = usable.iter().map(|ex| ex.encoding.height()).max().ok_or_else(|| {
        Error::contract("parser training needs at least one tree above the preterminal level")
    })?;
    let d = usable[0].units[0].len();
    let mut parser = Parser::new(cfg, d, pos, categories, top, cfg.train.seed)?;
    let mut store = std::mem::take(&mut parser.store);
    let log = train_loop(
        &mut store,
        usable.len(),
        &cfg.train,
        "parser",
        |g, s, i| parser.loss(g, s, usable[i]),
        |_, _, _| Ok(true),
    )?;
    parser.store = store;
    Ok((parser, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, GradCheckConfig};
    use crate::corpus::parse_bracketed;

    const JOHN: &str = "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))";

    fn cfg(epochs: usize) -> ParserConfig {
        ParserConfig {
            hidden: 6,
            inner: 5,
            max_height: 12,
            train: TrainConfig {
                epochs,
                batch_size: 1,
                lr: 2e-2,
                clip_norm: Some(5.0),
                seed: 2,
            },
        }
    }

    fn example(s: &str, seed: u64) -> ParserExample {
        let tree = parse_bracketed(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = (0..tree.len()).map(|_| Tensor::uniform(&[4], 1.0, &mut rng)).collect();
        ParserExample::new(tree, units).unwrap()
    }

    fn john_parser(seed: u64) -> (Parser, ParserExample) {
        let ex = example(JOHN, seed);
        let (pos, cats) = label_sets(&[ex.tree.clone()]).unwrap();
        (Parser::new(&cfg(1), 4, pos, cats, 4, seed).unwrap(), ex)
    }

    #[test]
    fn zero_parameters_segment_to_class_zero() {
        let (mut p, ex) = john_parser(0);
        for prm in p.store.params_mut() {
            prm.value.fill(0.0);
        }
        let pos = p.pos_ids(ex.encoding.pos()).unwrap();
        assert_eq!(p.segment_layer2(&ex.units, &pos).unwrap(), vec![0; 4]);
    }

    #[test]
    fn layerk_codes_are_constant_on_previous_segments() {
        let (p, ex) = john_parser(1);
        let pos = p.pos_ids(ex.encoding.pos()).unwrap();
        let prev = ex.encoding.code(2);
        let code = p.segment_layerk(&ex.units, &pos, prev, 3).unwrap();
        assert_eq!(code.len(), 4);
        assert_eq!(code[2], code[3]);
        assert!(p.segment_layerk(&ex.units, &pos, &[0, 3, 0, 0], 3).is_err());
        assert!(p.segment_layerk(&ex.units, &pos, prev, 2).is_err());
    }

    #[test]
    fn layerk_matches_explicit_substring_means() {
        let (p, ex) = john_parser(2);
        let pos = p.pos_ids(ex.encoding.pos()).unwrap();
        let prev = ex.encoding.code(2);
        let code = p.segment_layerk(&ex.units, &pos, prev, 3).unwrap();
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, &ex.units);
        let raw = p.layers[1].segmenter.scores(&mut g, &p.store, &xs, &pos).unwrap();
        for (s, e) in [(0usize, 1usize), (1, 2), (2, 4)] {
            let mut mean = vec![0.0; 2];
            for v in &raw[s..e] {
                for (m, x) in mean.iter_mut().zip(g.value(*v).data()) {
                    *m += x / (e - s) as f64;
                }
            }
            let want = if mean[1] > mean[0] { 1 } else { 0 };
            for t in s..e {
                assert_eq!(code[t], want);
            }
        }
        // A singleton span reduces to the position's own score.
        let singles = p.segment_layerk(&ex.units, &pos, &[0, 1, 0, 1], 3).unwrap();
        for (t, &bit) in singles.iter().enumerate() {
            let d = g.value(raw[t]).data();
            assert_eq!(bit, u8::from(d[1] > d[0]));
        }
    }

    #[test]
    fn classification_is_constant_per_segment() {
        let (p, ex) = john_parser(3);
        let pos = p.pos_ids(ex.encoding.pos()).unwrap();
        let cats = p.classify_layer(&ex.units, &pos, ex.encoding.code(3), 3).unwrap();
        assert_eq!(cats[1], cats[2]);
        assert_eq!(cats[2], cats[3]);
    }

    #[test]
    fn one_tree_overfit_reproduces_gold() {
        let ex = example(JOHN, 4);
        let (pos, cats) = label_sets(&[ex.tree.clone()]).unwrap();
        let (p, log) = train_parser(&[ex.clone()], pos, cats, &cfg(200)).unwrap();
        assert!(log.last().unwrap() < log.first().unwrap());
        let posv = p.pos_ids(ex.encoding.pos()).unwrap();
        assert_eq!(p.segment_layer2(&ex.units, &posv).unwrap(), ex.encoding.code(2));
        let got = p.parse(&ex.encoding.tokens, ex.encoding.pos(), &ex.units).unwrap();
        assert_eq!(got.bracketed, JOHN);
        let gt = p
            .parse_with_codes(&ex.encoding.tokens, ex.encoding.pos(), &ex.units, &ex.encoding.codes)
            .unwrap();
        assert_eq!(gt.columns, ex.encoding.columns);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (p, ex) = john_parser(5);
        let mut buf = Vec::new();
        crate::autodiff::write_checkpoint(&p.store, &mut buf).unwrap();
        let loaded = crate::autodiff::read_checkpoint(&buf[..]).unwrap();
        let q = Parser::from_checkpoint(&loaded, p.pos.clone(), p.categories.clone(), 12).unwrap();
        assert_eq!(q.top_layer(), 4);
        let a = p.parse(&ex.encoding.tokens, ex.encoding.pos(), &ex.units).unwrap();
        let b = q.parse(&ex.encoding.tokens, ex.encoding.pos(), &ex.units).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_pos_is_contract_error() {
        let (p, ex) = john_parser(6);
        assert!(p.parse(&["x"], &["ZZ"], &ex.units[..1]).is_err());
    }

    #[test]
    fn segmenter_gradient_check() {
        let (p, ex) = john_parser(7);
        let mut store = p.store.clone();
        let report = finite_diff_check(
            &mut store,
            |g, s| p.loss(g, s, &ex),
            GradCheckConfig {
                max_coords: 96,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}
