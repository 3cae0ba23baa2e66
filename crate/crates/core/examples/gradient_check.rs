//! Builds a small graph by hand, checks its gradients against central
//! differences, then runs the finite-difference suite over every block.
//!
//! `cargo run --release --example gradient_check -- [seed]`

use atpl::autodiff::{finite_diff_check, GradCheckConfig, ParamStore};
use atpl::gradsuite::gradient_suite;
use atpl::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atpl::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // loss = cross_entropy(W tanh(A x), 2)
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::uniform(&[4, 3], 1.0, &mut rng))?;
    let w = store.add("w", Tensor::uniform(&[5, 4], 1.0, &mut rng))?;
    let x = Tensor::uniform(&[3], 1.0, &mut rng);
    let report = finite_diff_check(
        &mut store,
        |g, s| {
            let (a, w, x) = (g.param(s, a), g.param(s, w), g.input(x.clone()));
            let h = g.matvec(a, x)?;
            let h = g.tanh(h)?;
            let logits = g.matvec(w, h)?;
            g.cross_entropy(logits, 2)
        },
        GradCheckConfig::default(),
    )?;
    println!("hand-built graph: {report}");

    for (block, r) in gradient_suite(seed)? {
        let verdict = if r.passed() { "ok" } else { "FAILED" };
        println!("{block:16} {:>4} coords  max rel error {:.2e}  {verdict}", r.checked, r.max_rel_error());
    }
    Ok(())
}
