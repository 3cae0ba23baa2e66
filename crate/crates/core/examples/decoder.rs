//! Runs the TPR decoder on a random context vector and checks that the
//! maintained sentence representation equals the binding of the emitted
//! embeddings to their unbinding vectors.
//!
//! `cargo run --example decoder`

use atpl::autodiff::{Graph, ParamStore};
use atpl::decoder::{DecodeMode, DecoderConfig, DecoderParams};
use atpl::tpr::bind_sequence;
use atpl::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atpl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let cfg = DecoderConfig {
        d: 8,
        hidden: 16,
        context: 32,
        vocab: 12,
    };
    let dec = DecoderParams::new(&mut store, "dec", cfg, &mut rng)?;
    let v_val = Tensor::uniform(&[cfg.context], 1.0, &mut rng);

    let mut g = Graph::new();
    let v = g.input(v_val.clone());
    let gold = [3usize, 7, 1, 4];
    let out = dec.decode(&mut g, &store, v, DecodeMode::TeacherForced { gold: &gold, eos: None })?;
    println!("teacher-forced loss over {} tokens: {:.4}", gold.len(), g.value(out.loss.unwrap()).item());

    let embed = store.value(dec.embed);
    let fillers: Vec<Tensor> = gold.iter().map(|&t| Tensor::vector(&embed.column(t))).collect();
    let bound = bind_sequence(&fillers, &out.units, cfg.d)?;
    let diff = g.value(out.state.s_tilde).max_abs_diff(bound.as_tensor());
    println!("running representation vs. explicit binding: max diff {diff:.2e}");
    for (t, u) in out.units.iter().enumerate() {
        let coeffs = dec.basis.matrix().matvec_t(u)?;
        println!("u_{} in role coordinates: max |coefficient| {:.3}", t + 1, coeffs.max_abs());
    }

    let mut g = Graph::new();
    let v = g.input(v_val);
    let greedy = dec.decode(&mut g, &store, v, DecodeMode::Greedy { max_len: 6, eos: Some(0) })?;
    println!("greedy tokens (untrained): {:?}, stopped on end token: {}", greedy.tokens, greedy.stopped);
    Ok(())
}
