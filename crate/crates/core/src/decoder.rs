//! The attentive TPR decoder.
//!
//! From a context vector `v`, every step computes
//!
//! ```text
//! a_t = h_{t-1} ⊕ vec(S̃_{t-1})
//! q_t = v ⊙ Attn_S(a_t)
//! S_t = reshape(FFNN(q_t), d×d)
//! u_t = U · Attn_u(a_t)              U: normalized Hadamard basis
//! f_t = S_t u_t
//! logits_t = W_eᵀ f_t
//! ```
//!
//! and, once token `x_t` is fixed (argmax or gold), binds its embedding with
//! `r_t = u_t`: `S̃_t = S̃_{t-1} + (W_e x_t) u_tᵀ`. The external LSTM then
//! reads `W_e x_t ⊕ u_t` to produce `h_t`; `h_0 = 0` and `S̃_0 = 0`.

use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::blocks::{Attention, Ffnn, LstmCell};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tpr::{hadamard_basis, RoleBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    /// Role/filler dimension; must be a power of two.
    pub d: usize,
    /// External LSTM hidden size.
    pub hidden: usize,
    /// Dimension of the context vector `v`.
    pub context: usize,
    pub vocab: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            d: 16,
            hidden: 64,
            context: 128,
            vocab: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecoderParams {
    pub config: DecoderConfig,
    pub attn_s: Attention,
    pub ffnn: Ffnn,
    pub attn_u: Attention,
    pub basis: RoleBasis,
    /// `W_e`, `d×V`; column `j` is the embedding (filler) of token `j`.
    pub embed: ParamId,
    pub lstm: LstmCell,
}

/// Zero-mean random embeddings: uniform entries with the per-dimension mean
/// over the vocabulary subtracted.
pub fn centered_random_embeddings<R: Rng>(d: usize, vocab: usize, rng: &mut R) -> Tensor {
    let mut we = Tensor::glorot(d, vocab, rng);
    center_rows(&mut we);
    we
}

/// Subtracts from each row of `m` its mean, so the columns average to zero.
pub fn center_rows(m: &mut Tensor) {
    let (rows, cols) = (m.rows(), m.cols());
    for r in 0..rows {
        let mean = m.row(r).iter().sum::<f64>() / cols as f64;
        for c in 0..cols {
            let v = m.at(r, c) - mean;
            m.set(r, c, v);
        }
    }
}

impl DecoderParams {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, config: DecoderConfig, rng: &mut R) -> Result<Self> {
        let DecoderConfig { d, hidden, context, vocab } = config;
        let basis = hadamard_basis(d)?;
        if vocab == 0 || hidden == 0 || context == 0 {
            return Err(Error::Config(format!("decoder dimensions must be positive: {config:?}")));
        }
        let control = hidden + d * d;
        Ok(DecoderParams {
            config,
            attn_s: Attention::new(store, &format!("{name}.attn_s"), control, context, rng)?,
            ffnn: Ffnn::new(store, &format!("{name}.ffnn"), context, d * d, rng)?,
            attn_u: Attention::new(store, &format!("{name}.attn_u"), control, d, rng)?,
            basis,
            embed: store.add(format!("{name}.embed"), centered_random_embeddings(d, vocab, rng))?,
            lstm: LstmCell::new(store, &format!("{name}.lstm"), 2 * d, hidden, rng)?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.attn_s.params().to_vec();
        p.extend(self.ffnn.params());
        p.extend(self.attn_u.params());
        p.push(self.embed);
        p.extend(self.lstm.params());
        p
    }

    pub fn initial_state(&self, g: &mut Graph, max_len: usize) -> DecoderState {
        let (h, c) = self.lstm.zero_state(g);
        let d = self.config.d;
        DecoderState {
            s_tilde: g.input(Tensor::zeros(&[d, d])),
            h,
            c,
            t: 0,
            max_len,
            tokens: Vec::new(),
        }
    }

    /// Computes `u_t`, `S_t`, `f_t` and the token logits for the next step
    /// without committing a token.
    pub fn predict(&self, g: &mut Graph, store: &ParamStore, st: &DecoderState, v: Var) -> Result<StepOutput> {
        let d = self.config.d;
        let ctx = g.value(v).shape();
        if ctx != [self.config.context] {
            return Err(Error::dim("decoder_step", &[ctx, &[self.config.context]]));
        }
        if st.t >= st.max_len {
            return Err(Error::Generation(format!("step {} exceeds maximum length {}", st.t + 1, st.max_len)));
        }
        let s_flat = g.reshape(st.s_tilde, &[d * d])?;
        let control = g.concat(&[st.h, s_flat])?;

        let gate = self.attn_s.forward(g, store, control)?;
        let q = g.mul(v, gate)?;
        let s_vec = self.ffnn.forward(g, store, q)?;
        let s_t = g.reshape(s_vec, &[d, d])?;

        let coeffs = self.attn_u.forward(g, store, control)?;
        let basis = g.input(self.basis.matrix().clone());
        let u = g.matvec(basis, coeffs)?;

        let f = g.matvec(s_t, u)?;
        let we = g.param(store, self.embed);
        let logits = g.matvec_t(we, f)?;
        Ok(StepOutput {
            u,
            s_t,
            f,
            logits,
            coeffs,
        })
    }

    /// Binds `token` at role `u_t` and advances the LSTM.
    pub fn advance(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        st: &DecoderState,
        out: &StepOutput,
        token: usize,
    ) -> Result<DecoderState> {
        if token >= self.config.vocab {
            return Err(Error::contract(format!("token {token} outside vocabulary of {}", self.config.vocab)));
        }
        let we = g.param(store, self.embed);
        let emb = g.select_column(we, token)?;
        let bound = g.outer(emb, out.u)?;
        let s_tilde = g.add(st.s_tilde, bound)?;
        let x = g.concat(&[emb, out.u])?;
        let (h, c) = self.lstm.step(g, store, x, st.h, st.c)?;
        let mut tokens = st.tokens.clone();
        tokens.push(token);
        Ok(DecoderState {
            s_tilde,
            h,
            c,
            t: st.t + 1,
            max_len: st.max_len,
            tokens,
        })
    }

    /// One full step: predict, pick the token (`gold`, or argmax of the
    /// logits with ties to the lowest id), then advance.
    pub fn step(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        st: &DecoderState,
        v: Var,
        gold: Option<usize>,
    ) -> Result<(StepOutput, usize, DecoderState)> {
        let out = self.predict(g, store, st, v)?;
        let token = gold.unwrap_or_else(|| g.value(out.logits).argmax());
        let next = self.advance(g, store, st, &out, token)?;
        Ok((out, token, next))
    }

    /// Decodes a full sequence from context `v`.
    pub fn decode(&self, g: &mut Graph, store: &ParamStore, v: Var, mode: DecodeMode<'_>) -> Result<DecodeOutput> {
        match mode {
            DecodeMode::Greedy { max_len, eos } => {
                if max_len == 0 {
                    return Err(Error::contract("max_len must be at least 1"));
                }
                let mut st = self.initial_state(g, max_len);
                let mut units = Vec::new();
                let mut stopped = false;
                while st.t < max_len {
                    let out = self.predict(g, store, &st, v)?;
                    let token = g.value(out.logits).argmax();
                    if Some(token) == eos {
                        stopped = true;
                        break;
                    }
                    units.push(g.value(out.u).clone());
                    st = self.advance(g, store, &st, &out, token)?;
                }
                Ok(DecodeOutput {
                    tokens: st.tokens.clone(),
                    units,
                    loss: None,
                    stopped,
                    state: st,
                })
            }
            DecodeMode::TeacherForced { gold, eos } => {
                if gold.is_empty() {
                    return Err(Error::contract("teacher forcing needs a non-empty gold sequence"));
                }
                let steps = gold.len() + usize::from(eos.is_some());
                let mut st = self.initial_state(g, steps);
                let mut units = Vec::with_capacity(gold.len());
                let mut losses = Vec::with_capacity(steps);
                for &token in gold {
                    let out = self.predict(g, store, &st, v)?;
                    losses.push(g.cross_entropy(out.logits, token)?);
                    units.push(g.value(out.u).clone());
                    st = self.advance(g, store, &st, &out, token)?;
                }
                if let Some(eos) = eos {
                    let out = self.predict(g, store, &st, v)?;
                    losses.push(g.cross_entropy(out.logits, eos)?);
                }
                let loss = g.add_all(&losses)?;
                Ok(DecodeOutput {
                    tokens: gold.to_vec(),
                    units,
                    loss: Some(loss),
                    stopped: eos.is_some(),
                    state: st,
                })
            }
        }
    }
}

/// Graph handles of the recurrent decoder state.
#[derive(Debug, Clone)]
pub struct DecoderState {
    /// TPR of the tokens emitted so far.
    pub s_tilde: Var,
    pub h: Var,
    pub c: Var,
    /// Number of tokens emitted.
    pub t: usize,
    pub max_len: usize,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub u: Var,
    pub s_t: Var,
    pub f: Var,
    pub logits: Var,
    /// Attention output over the Hadamard columns; `u = U · coeffs`.
    pub coeffs: Var,
}

#[derive(Debug, Clone, Copy)]
pub enum DecodeMode<'a> {
    Greedy { max_len: usize, eos: Option<usize> },
    /// Scores `gold` (and a trailing `eos`, when given) under the model.
    TeacherForced { gold: &'a [usize], eos: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct DecodeOutput {
    /// Emitted tokens, excluding the end-of-sentence token.
    pub tokens: Vec<usize>,
    /// `u_t` for every emitted token.
    pub units: Vec<Tensor>,
    /// Summed cross-entropy (teacher-forced mode only).
    pub loss: Option<Var>,
    /// Whether decoding ended on the end-of-sentence token.
    pub stopped: bool,
    pub state: DecoderState,
}

/// `W_eᵀ f`: similarity of a filler to every token embedding.
pub fn token_logits(embed: &Tensor, f: &Tensor) -> Result<Tensor> {
    embed.matvec_t(f)
}
