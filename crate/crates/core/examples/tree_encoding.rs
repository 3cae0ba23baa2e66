//! Layer encodings of a constituency tree and their reconstruction.
//!
//! `cargo run --example tree_encoding -- ["(S(NP(DT the)(NN dog))(VP(VBD ran)))"]`

use atpl::corpus::parse_bracketed;
use atpl::parser::{build_tree, derive_gold_layers, format_encoding};

fn main() -> atpl::Result<()> {
    let input = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))".to_string());
    let tree = parse_bracketed(&input)?;
    let enc = derive_gold_layers(&tree)?;
    println!("height {}", enc.height());
    for k in 1..=enc.height() {
        let code = if k >= 2 {
            enc.code(k).iter().map(u8::to_string).collect::<Vec<_>>().join("")
        } else {
            "-".repeat(enc.len())
        };
        println!("layer {k}: code {code:8} categories {}", enc.column(k).join(" "));
    }
    let rebuilt = build_tree(&enc.tokens, &enc.columns, &enc.codes, enc.height())?;
    println!("rebuilt: {rebuilt}");
    println!("round trip exact: {}", rebuilt == tree.to_bracketed());
    println!("\nencoding file:\n{}", format_encoding(&enc));
    Ok(())
}
