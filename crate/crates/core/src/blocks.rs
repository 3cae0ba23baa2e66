//! Learned building blocks shared by the decoder, tagger and parser.
//!
//! Every constructor registers fresh parameters in a [`ParamStore`], so two
//! instances never alias storage. Weight matrices start Glorot-uniform and
//! biases at zero.

use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_input(op: &'static str, g: &Graph, v: Var, dim: usize) -> Result<()> {
    let shape = g.value(v).shape();
    if shape != [dim] {
        return Err(Error::dim(op, &[shape, &[dim]]));
    }
    Ok(())
}

/// `Attn(v) = σ(W v + b)`: a per-dimension gate in (0, 1).
#[derive(Debug, Clone)]
pub struct Attention {
    pub w: ParamId,
    pub b: ParamId,
    in_dim: usize,
    out_dim: usize,
}

impl Attention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(Attention {
            w: store.add(format!("{name}.w"), Tensor::glorot(out_dim, in_dim, rng))?,
            b: store.add(format!("{name}.b"), Tensor::zeros(&[out_dim]))?,
            in_dim,
            out_dim,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, v: Var) -> Result<Var> {
        check_input("attention", g, v, self.in_dim)?;
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        let z = g.matvec(w, v)?;
        let z = g.add(z, b)?;
        g.sigmoid(z)
    }
}

/// `FFNN(v) = tanh(W v + b)`: a single fully connected layer.
#[derive(Debug, Clone)]
pub struct Ffnn {
    pub w: ParamId,
    pub b: ParamId,
    in_dim: usize,
    out_dim: usize,
}

impl Ffnn {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(Ffnn {
            w: store.add(format!("{name}.w"), Tensor::glorot(out_dim, in_dim, rng))?,
            b: store.add(format!("{name}.b"), Tensor::zeros(&[out_dim]))?,
            in_dim,
            out_dim,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, v: Var) -> Result<Var> {
        check_input("ffnn", g, v, self.in_dim)?;
        let (w, b) = (g.param(store, self.w), g.param(store, self.b));
        let z = g.matvec(w, v)?;
        let z = g.add(z, b)?;
        g.tanh(z)
    }
}

/// Standard LSTM cell on the concatenated input `[x; h_prev]`:
///
/// ```text
/// i = σ(W_i [x; h] + b_i)    f = σ(W_f [x; h] + b_f)
/// o = σ(W_o [x; h] + b_o)    g = tanh(W_g [x; h] + b_g)
/// c' = f ⊙ c + i ⊙ g         h' = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone)]
pub struct LstmCell {
    gates: [(ParamId, ParamId); 4],
    input: usize,
    hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut gate = |g: &str| -> Result<(ParamId, ParamId)> {
            Ok((
                store.add(format!("{name}.w{g}"), Tensor::glorot(hidden, input + hidden, rng))?,
                store.add(format!("{name}.b{g}"), Tensor::zeros(&[hidden]))?,
            ))
        };
        let gates = [gate("i")?, gate("f")?, gate("o")?, gate("g")?];
        Ok(LstmCell { gates, input, hidden })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.gates.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// Zero `(h, c)` leaves.
    pub fn zero_state(&self, g: &mut Graph) -> (Var, Var) {
        (g.input(Tensor::zeros(&[self.hidden])), g.input(Tensor::zeros(&[self.hidden])))
    }

    pub fn step(&self, g: &mut Graph, store: &ParamStore, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        check_input("lstm_step", g, x, self.input)?;
        check_input("lstm_step", g, h_prev, self.hidden)?;
        check_input("lstm_step", g, c_prev, self.hidden)?;
        let xh = g.concat(&[x, h_prev])?;
        let mut pre = [xh; 4];
        for (slot, &(w, b)) in pre.iter_mut().zip(&self.gates) {
            let (w, b) = (g.param(store, w), g.param(store, b));
            let z = g.matvec(w, xh)?;
            *slot = g.add(z, b)?;
        }
        let i = g.sigmoid(pre[0])?;
        let f = g.sigmoid(pre[1])?;
        let o = g.sigmoid(pre[2])?;
        let cand = g.tanh(pre[3])?;
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c)?;
        let h = g.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs the cell over `inputs` from a zero state, returning every hidden state.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, inputs: &[Var]) -> Result<Vec<Var>> {
        let (mut h, mut c) = self.zero_state(g);
        let mut out = Vec::with_capacity(inputs.len());
        for &x in inputs {
            (h, c) = self.step(g, store, x, h, c)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Two independent LSTMs, one reading left to right and one right to left.
#[derive(Debug, Clone)]
pub struct Blstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

impl Blstm {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(Blstm {
            fwd: LstmCell::new(store, &format!("{name}.fwd"), input, hidden, rng)?,
            bwd: LstmCell::new(store, &format!("{name}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.fwd.params();
        p.extend(self.bwd.params());
        p
    }

    /// Returns `(h→, h←)` aligned to input positions: `h→_t` has read
    /// inputs `1..=t`, `h←_t` has read inputs `t..=T`.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, inputs: &[Var]) -> Result<(Vec<Var>, Vec<Var>)> {
        if inputs.is_empty() {
            return Err(Error::contract("BLSTM over an empty sequence"));
        }
        let fwd = self.fwd.run(g, store, inputs)?;
        let reversed: Vec<Var> = inputs.iter().rev().copied().collect();
        let mut bwd = self.bwd.run(g, store, &reversed)?;
        bwd.reverse();
        Ok((fwd, bwd))
    }
}

/// Token-conditioned weight `W(x) = W_a · diag(W_b x) · W_c`, applied to a
/// vector without materializing the `m×n` matrix.
#[derive(Debug, Clone)]
pub struct FactoredWeight {
    pub wa: ParamId,
    pub wb: ParamId,
    pub wc: ParamId,
    vocab: usize,
    in_dim: usize,
    out_dim: usize,
}

impl FactoredWeight {
    /// `W(x)` maps `in_dim` to `out_dim`, conditioned on one of `vocab`
    /// symbols through an inner dimension `inner`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        out_dim: usize,
        inner: usize,
        vocab: usize,
        in_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(FactoredWeight {
            wa: store.add(format!("{name}.wa"), Tensor::glorot(out_dim, inner, rng))?,
            wb: store.add(format!("{name}.wb"), Tensor::glorot(inner, vocab, rng))?,
            wc: store.add(format!("{name}.wc"), Tensor::glorot(inner, in_dim, rng))?,
            vocab,
            in_dim,
            out_dim,
        })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn params(&self) -> [ParamId; 3] {
        [self.wa, self.wb, self.wc]
    }

    /// `W(e_symbol) · h`, computed as `W_a ((W_b e_symbol) ⊙ (W_c h))`.
    pub fn apply(&self, g: &mut Graph, store: &ParamStore, symbol: usize, h: Var) -> Result<Var> {
        if symbol >= self.vocab {
            return Err(Error::contract(format!(
                "factored weight symbol {symbol} outside vocabulary of {}",
                self.vocab
            )));
        }
        check_input("factored_weight", g, h, self.in_dim)?;
        let (wa, wb, wc) = (g.param(store, self.wa), g.param(store, self.wb), g.param(store, self.wc));
        let scale = g.select_column(wb, symbol)?;
        let inner = g.matvec(wc, h)?;
        let inner = g.mul(scale, inner)?;
        g.matvec(wa, inner)
    }

    /// Same as [`apply`](Self::apply) for an explicit one-hot vector.
    pub fn apply_one_hot(&self, g: &mut Graph, store: &ParamStore, x: &Tensor, h: Var) -> Result<Var> {
        self.apply(g, store, one_hot_index(x, self.vocab)?, h)
    }
}

/// Index of the single 1 in a one-hot vector of length `len`.
pub fn one_hot_index(x: &Tensor, len: usize) -> Result<usize> {
    let not_one_hot = || Error::contract(format!("expected a one-hot vector of length {len}, got {x:?}"));
    if !x.is_vector() || x.len() != len {
        return Err(not_one_hot());
    }
    let mut hot = None;
    for (i, &v) in x.data().iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if v != 0.0 {
            return Err(not_one_hot());
        }
    }
    hot.ok_or_else(not_one_hot)
}
