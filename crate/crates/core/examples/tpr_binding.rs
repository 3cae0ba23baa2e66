//! Binds random fillers to Hadamard roles and unbinds them again.
//!
//! `cargo run --example tpr_binding`

use atpl::tpr::{bind_sequence, hadamard_basis, unbind};
use atpl::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atpl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in [2, 8, 16, 32] {
        let basis = hadamard_basis(d)?;
        let fillers: Vec<Tensor> = (0..d).map(|_| Tensor::uniform(&[d], 1.0, &mut rng)).collect();
        let roles: Vec<Tensor> = (0..d).map(|j| basis.column(j)).collect();
        let s = bind_sequence(&fillers, &roles, d)?;
        let mut worst = 0.0f64;
        for (f, r) in fillers.iter().zip(&roles) {
            worst = worst.max(unbind(&s, r)?.max_abs_diff(f));
        }
        println!("d = {d:2}: {d} fillers bound, max unbinding error {worst:.2e}");
    }

    // More fillers than roles: the extra binding superposes on an existing role.
    let d = 4;
    let basis = hadamard_basis(d)?;
    let fillers: Vec<Tensor> = (0..d + 1).map(|_| Tensor::uniform(&[d], 1.0, &mut rng)).collect();
    let mut roles: Vec<Tensor> = (0..d).map(|j| basis.column(j)).collect();
    roles.push(basis.column(0));
    let s = bind_sequence(&fillers, &roles, d)?;
    let mixed = unbind(&s, &roles[0])?;
    let expected = fillers[0].add(&fillers[d])?;
    println!("d = 4, 5 fillers: role 0 now returns f_1 + f_5 (error {:.2e})", mixed.max_abs_diff(&expected));
    Ok(())
}
