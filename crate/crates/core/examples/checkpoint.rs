//! Saves a parameter store to the text checkpoint format and reads it back.
//!
//! `cargo run --example checkpoint`

use atpl::autodiff::{read_checkpoint, write_checkpoint, ParamStore};
use atpl::Tensor;

fn main() -> atpl::Result<()> {
    let mut store = ParamStore::new();
    store.add("layer.w", Tensor::matrix(&[vec![1.0, -0.5], vec![0.25, 3.0e-7]])?)?;
    store.add("layer.b", Tensor::vector(&[0.1, std::f64::consts::PI]))?;

    let mut buf = Vec::new();
    write_checkpoint(&store, &mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));

    let loaded = read_checkpoint(&buf[..])?;
    let same = store
        .params()
        .iter()
        .zip(loaded.params())
        .all(|(a, b)| a.name == b.name && a.value == b.value);
    println!("reloaded {} parameters, bit-identical: {same}", loaded.len());
    Ok(())
}
