//! A BLSTM over unbinding vectors followed by symbol-conditioned output
//! weights:
//!
//! ```text
//! (h→_t, h←_t) = BLSTM(u_1..u_T)
//! score_t = W→(x_t) h→_t + W←(x_t) h←_t
//! ```
//!
//! where `W(x) = W_a diag(W_b x) W_c`. The tagger conditions on token ids;
//! the parser's segmenters and classifiers condition on POS ids.

use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::blocks::{Blstm, FactoredWeight};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelerDims {
    /// Dimension of each input vector (`d`).
    pub input: usize,
    pub hidden: usize,
    /// Inner dimension of the factored weights.
    pub inner: usize,
    /// Number of conditioning symbols.
    pub symbols: usize,
    /// Number of output classes.
    pub classes: usize,
}

#[derive(Debug, Clone)]
pub struct Labeler {
    pub dims: LabelerDims,
    pub blstm: Blstm,
    pub fwd: FactoredWeight,
    pub bwd: FactoredWeight,
}

impl Labeler {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dims: LabelerDims, rng: &mut R) -> Result<Self> {
        let LabelerDims {
            input,
            hidden,
            inner,
            symbols,
            classes,
        } = dims;
        if [input, hidden, inner, symbols, classes].contains(&0) {
            return Err(Error::Config(format!("labeler `{name}` needs positive dimensions: {dims:?}")));
        }
        Ok(Labeler {
            dims,
            blstm: Blstm::new(store, &format!("{name}.blstm"), input, hidden, rng)?,
            fwd: FactoredWeight::new(store, &format!("{name}.out_fwd"), classes, inner, symbols, hidden, rng)?,
            bwd: FactoredWeight::new(store, &format!("{name}.out_bwd"), classes, inner, symbols, hidden, rng)?,
        })
    }

    /// Reads the dimensions of a labeler named `name` from stored shapes.
    pub fn infer_dims(store: &ParamStore, name: &str) -> Result<LabelerDims> {
        let shape = |suffix: &str| -> Result<Vec<usize>> {
            let full = format!("{name}.{suffix}");
            match store.id(&full) {
                Some(id) if store.value(id).rank() == 2 => Ok(store.value(id).shape().to_vec()),
                _ => Err(Error::Config(format!("checkpoint lacks matrix `{full}`"))),
            }
        };
        let gate = shape("blstm.fwd.wi")?;
        let wa = shape("out_fwd.wa")?;
        let wb = shape("out_fwd.wb")?;
        let hidden = gate[0];
        Ok(LabelerDims {
            input: gate[1].checked_sub(hidden).filter(|&d| d > 0).ok_or_else(|| {
                Error::Config(format!("`{name}` has inconsistent LSTM shapes {gate:?}"))
            })?,
            hidden,
            inner: wa[1],
            symbols: wb[1],
            classes: wa[0],
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.blstm.params();
        p.extend(self.fwd.params());
        p.extend(self.bwd.params());
        p
    }

    /// Unnormalized class scores at every position.
    pub fn scores(&self, g: &mut Graph, store: &ParamStore, units: &[Var], symbols: &[usize]) -> Result<Vec<Var>> {
        if units.len() != symbols.len() {
            return Err(Error::contract(format!(
                "{} input vectors but {} conditioning symbols",
                units.len(),
                symbols.len()
            )));
        }
        let (hf, hb) = self.blstm.run(g, store, units)?;
        let mut out = Vec::with_capacity(units.len());
        for t in 0..units.len() {
            let a = self.fwd.apply(g, store, symbols[t], hf[t])?;
            let b = self.bwd.apply(g, store, symbols[t], hb[t])?;
            out.push(g.add(a, b)?);
        }
        Ok(out)
    }

    /// Places constant unit vectors on the graph.
    pub fn inputs(g: &mut Graph, units: &[Tensor]) -> Vec<Var> {
        units.iter().map(|u| g.input(u.clone())).collect()
    }
}

/// Mean of the scores over each span of `spans` (half-open ranges),
/// replicated back to every position of the span.
pub fn span_means(g: &mut Graph, scores: &[Var], spans: &[(usize, usize)]) -> Result<Vec<Var>> {
    let mut out = Vec::with_capacity(scores.len());
    for &(s, e) in spans {
        if s >= e || e > scores.len() {
            return Err(Error::contract(format!("bad span [{s}, {e}) over {} positions", scores.len())));
        }
        let m = g.mean(&scores[s..e])?;
        out.extend(std::iter::repeat(m).take(e - s));
    }
    if out.len() != scores.len() {
        return Err(Error::contract("spans do not cover the sequence"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::softmax;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> LabelerDims {
        LabelerDims {
            input: 4,
            hidden: 3,
            inner: 5,
            symbols: 6,
            classes: 3,
        }
    }

    #[test]
    fn shapes_and_dims_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let l = Labeler::new(&mut store, "tag", dims(), &mut rng).unwrap();
        assert_eq!(Labeler::infer_dims(&store, "tag").unwrap(), dims());
        let units: Vec<Tensor> = (0..4).map(|_| Tensor::uniform(&[4], 1.0, &mut rng)).collect();
        let mut g = Graph::new();
        let xs = Labeler::inputs(&mut g, &units);
        let s = l.scores(&mut g, &store, &xs, &[0, 5, 2, 2]).unwrap();
        assert_eq!(s.len(), 4);
        for v in s {
            assert_eq!(g.value(v).shape(), &[3]);
            let p = softmax(g.value(v).data());
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(l.scores(&mut g, &store, &xs, &[0]).is_err());
    }

    #[test]
    fn span_means_are_constant_on_spans() {
        let mut g = Graph::new();
        let xs: Vec<Var> = (0..4).map(|i| g.input(Tensor::vector(&[i as f64]))).collect();
        let m = span_means(&mut g, &xs, &[(0, 1), (1, 4)]).unwrap();
        assert_eq!(g.value(m[0]).data(), &[0.0]);
        for &v in &m[1..] {
            assert_eq!(g.value(v).data(), &[2.0]);
        }
        assert!(span_means(&mut g, &xs, &[(0, 2)]).is_err());
        assert!(span_means(&mut g, &xs, &[(0, 0), (0, 4)]).is_err());
    }
}
