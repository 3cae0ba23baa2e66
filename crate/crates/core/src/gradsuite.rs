//! Finite-difference checks of every trainable block on small seeded
//! instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_diff_check, GradCheckConfig, GradCheckReport, Graph, ParamStore};
use crate::blocks::{Attention, Blstm, FactoredWeight, Ffnn, LstmCell};
use crate::corpus::parse_bracketed;
use crate::decoder::{DecodeMode, DecoderConfig, DecoderParams};
use crate::error::Result;
use crate::parser::{label_sets, Parser, ParserConfig, ParserExample};
use crate::tagger::{TaggedExample, Tagger, TaggerConfig};
use crate::tensor::Tensor;

/// Names of the checked blocks, in report order.
pub const BLOCKS: [&str; 8] = [
    "attention",
    "ffnn",
    "lstm",
    "blstm",
    "factored_weight",
    "decoder",
    "tagger",
    "segmenter",
];

fn vecs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Tensor> {
    (0..n).map(|_| Tensor::uniform(&[dim], 1.0, rng)).collect()
}

/// Loss `Σ y ⊙ w` for a fixed random weighting `w`, so that every output
/// coordinate contributes a distinct gradient.
fn weighted_sum(g: &mut Graph, y: crate::autodiff::Var, w: &Tensor) -> Result<crate::autodiff::Var> {
    let w = g.input(w.clone());
    g.dot(y, w)
}

pub fn check_block(name: &str, seed: u64, cfg: GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let cfg = GradCheckConfig { seed, ..cfg };
    match name {
        "attention" => {
            let a = Attention::new(&mut store, "attn", 5, 4, &mut rng)?;
            let (x, w) = (Tensor::uniform(&[5], 1.0, &mut rng), Tensor::uniform(&[4], 1.0, &mut rng));
            finite_diff_check(
                &mut store,
                |g, s| {
                    let x = g.input(x.clone());
                    let y = a.forward(g, s, x)?;
                    weighted_sum(g, y, &w)
                },
                cfg,
            )
        }
        "ffnn" => {
            let f = Ffnn::new(&mut store, "ffnn", 6, 5, &mut rng)?;
            let (x, w) = (Tensor::uniform(&[6], 1.0, &mut rng), Tensor::uniform(&[5], 1.0, &mut rng));
            finite_diff_check(
                &mut store,
                |g, s| {
                    let x = g.input(x.clone());
                    let y = f.forward(g, s, x)?;
                    weighted_sum(g, y, &w)
                },
                cfg,
            )
        }
        "lstm" => {
            let cell = LstmCell::new(&mut store, "lstm", 3, 4, &mut rng)?;
            let xs = vecs(&mut rng, 3, 3);
            let w = Tensor::uniform(&[4], 1.0, &mut rng);
            finite_diff_check(
                &mut store,
                |g, s| {
                    let xs: Vec<_> = xs.iter().map(|x| g.input(x.clone())).collect();
                    let hs = cell.run(g, s, &xs)?;
                    weighted_sum(g, *hs.last().expect("3 steps"), &w)
                },
                cfg,
            )
        }
        "blstm" => {
            let b = Blstm::new(&mut store, "blstm", 3, 3, &mut rng)?;
            let xs = vecs(&mut rng, 3, 3);
            let ws = vecs(&mut rng, 6, 3);
            finite_diff_check(
                &mut store,
                |g, s| {
                    let xs: Vec<_> = xs.iter().map(|x| g.input(x.clone())).collect();
                    let (f, bk) = b.run(g, s, &xs)?;
                    let mut terms = Vec::new();
                    for (h, w) in f.iter().chain(&bk).zip(&ws) {
                        terms.push(weighted_sum(g, *h, w)?);
                    }
                    g.add_all(&terms)
                },
                cfg,
            )
        }
        "factored_weight" => {
            let fw = FactoredWeight::new(&mut store, "fw", 3, 4, 5, 6, &mut rng)?;
            let (x, w) = (Tensor::uniform(&[6], 1.0, &mut rng), Tensor::uniform(&[3], 1.0, &mut rng));
            finite_diff_check(
                &mut store,
                |g, s| {
                    let x = g.input(x.clone());
                    let mut terms = Vec::new();
                    for sym in [1, 4] {
                        let y = fw.apply(g, s, sym, x)?;
                        terms.push(weighted_sum(g, y, &w)?);
                    }
                    g.add_all(&terms)
                },
                cfg,
            )
        }
        "decoder" => {
            let dcfg = DecoderConfig {
                d: 4,
                hidden: 5,
                context: 6,
                vocab: 7,
            };
            let dec = DecoderParams::new(&mut store, "dec", dcfg, &mut rng)?;
            let v = Tensor::uniform(&[6], 1.0, &mut rng);
            let gold = [2usize, 5, 1];
            finite_diff_check(
                &mut store,
                |g, s| {
                    let v = g.input(v.clone());
                    let out = dec.decode(g, s, v, DecodeMode::TeacherForced { gold: &gold, eos: Some(6) })?;
                    Ok(out.loss.expect("teacher forcing yields a loss"))
                },
                GradCheckConfig {
                    max_coords: cfg.max_coords.max(200),
                    ..cfg
                },
            )
        }
        "tagger" => {
            let tcfg = TaggerConfig {
                hidden: 4,
                inner: 3,
                ..TaggerConfig::default()
            };
            let t = Tagger::new(&tcfg, 4, 5, 3, seed)?;
            let ex = TaggedExample {
                tokens: vec![0, 3, 1],
                units: vecs(&mut rng, 3, 4),
                tags: vec![2, 0, 1],
            };
            let mut store = t.store.clone();
            finite_diff_check(&mut store, |g, s| t.loss(g, s, &ex), cfg)
        }
        "segmenter" => {
            let tree = parse_bracketed("(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))")?;
            let (pos, cats) = label_sets(&[tree.clone()])?;
            let pcfg = ParserConfig {
                hidden: 4,
                inner: 3,
                ..ParserConfig::default()
            };
            let p = Parser::new(&pcfg, 4, pos, cats, 4, seed)?;
            let ex = ParserExample::new(tree, vecs(&mut rng, 4, 4))?;
            let mut store = p.store.clone();
            finite_diff_check(&mut store, |g, s| p.loss(g, s, &ex), cfg)
        }
        other => Err(crate::error::Error::Config(format!("unknown block `{other}`"))),
    }
}

/// Checks every block in [`BLOCKS`].
pub fn gradient_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let cfg = GradCheckConfig {
        max_coords: 96,
        ..GradCheckConfig::default()
    };
    BLOCKS
        .iter()
        .map(|&b| Ok((b, check_block(b, seed, cfg)?)))
        .collect()
}
