//! Tree reconstruction from layer codes and category columns.
//!
//! Walking tokens left to right, a bracket `(X` opens at the first token of
//! every layer-`k` segment whose node (span and category) differs from the
//! node below it, layer 1 emits `(TAG token)`, and every node whose span
//! ends at the current token is closed, innermost first. A node that
//! repeats the span and category of the layer below is the same node
//! replicated upward, so a unary chain `X → X` cannot be represented.

use crate::error::{Error, Result};
use crate::parser::layers::code_spans;

fn fail(position: usize, message: impl Into<String>) -> Error {
    Error::Reconstruction {
        position: position + 1,
        message: message.into(),
    }
}

/// Builds the bracketed string from `columns[k-1]` (category columns,
/// `k = 1..=height`, POS tags first) and `codes[k-2]` (binary codes,
/// `k = 2..=height`).
pub fn build_tree<S: AsRef<str>, C: AsRef<str>>(
    tokens: &[S],
    columns: &[Vec<C>],
    codes: &[Vec<u8>],
    height: usize,
) -> Result<String> {
    let n = tokens.len();
    if n == 0 || height == 0 {
        return Err(fail(0, "nothing to build"));
    }
    if columns.len() < height || codes.len() + 1 < height {
        return Err(fail(
            0,
            format!(
                "height {height} needs {height} category columns and {} codes, got {} and {}",
                height - 1,
                columns.len(),
                codes.len()
            ),
        ));
    }
    // spans[k-1][t] is the span of token t's node at layer k.
    let mut spans: Vec<Vec<(usize, usize)>> = Vec::with_capacity(height);
    for k in 1..=height {
        let col = &columns[k - 1];
        if col.len() != n {
            return Err(fail(0, format!("layer {k} column has {} entries for {n} tokens", col.len())));
        }
        let mut per_token = vec![(0, 0); n];
        if k == 1 {
            for (t, s) in per_token.iter_mut().enumerate() {
                *s = (t, t + 1);
            }
        } else {
            let code = &codes[k - 2];
            if code.len() != n {
                return Err(fail(0, format!("layer {k} code has {} entries for {n} tokens", code.len())));
            }
            let segs = code_spans(code).map_err(|e| fail(0, format!("layer {k}: {e}")))?;
            for (s, e) in segs {
                for t in s..e {
                    if col[t].as_ref() != col[s].as_ref() {
                        return Err(fail(
                            t,
                            format!(
                                "layer {k} category changes from `{}` to `{}` inside a segment",
                                col[s].as_ref(),
                                col[t].as_ref()
                            ),
                        ));
                    }
                    per_token[t] = (s, e);
                }
            }
            let below = &spans[k - 2];
            for t in 1..n {
                let boundary = per_token[t].0 == t;
                if boundary && below[t].0 != t {
                    return Err(fail(t, format!("layer {k} segment boundary splits a layer {} segment", k - 1)));
                }
            }
        }
        spans.push(per_token);
    }
    if spans[height - 1][0] != (0, n) {
        return Err(fail(0, format!("top layer {height} is not a single segment")));
    }

    // A node first appears at its own height; above that it is replicated
    // with the same span and category.
    let is_new = |k: usize, t: usize| -> bool {
        k == 1
            || spans[k - 1][t] != spans[k - 2][t]
            || columns[k - 1][t].as_ref() != columns[k - 2][t].as_ref()
    };
    let mut out = String::new();
    for (t, tok) in tokens.iter().enumerate() {
        for k in (2..=height).rev() {
            if spans[k - 1][t].0 == t && is_new(k, t) {
                out.push('(');
                out.push_str(columns[k - 1][t].as_ref());
            }
        }
        out.push('(');
        out.push_str(columns[0][t].as_ref());
        out.push(' ');
        out.push_str(tok.as_ref());
        out.push(')');
        for k in 2..=height {
            if spans[k - 1][t].1 == t + 1 && is_new(k, t) {
                out.push(')');
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_bracketed, synth_corpus, SynthGrammar};
    use crate::parser::layers::derive_gold_layers;

    fn cols(rows: &[&[&str]]) -> Vec<Vec<String>> {
        rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn worked_example() {
        let columns = cols(&[
            &["NNP", "VBD", "DT", "NN"],
            &["NNP", "VBD", "NP", "NP"],
            &["NNP", "VP", "VP", "VP"],
            &["S", "S", "S", "S"],
        ]);
        let codes = vec![vec![0, 1, 0, 0], vec![0, 1, 1, 1], vec![0, 0, 0, 0]];
        let s = build_tree(&["John", "hit", "the", "ball"], &columns, &codes, 4).unwrap();
        assert_eq!(s, "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))");
    }

    #[test]
    fn minimal_tree() {
        let s = build_tree(&["dog"], &cols(&[&["NN"], &["S"]]), &[vec![0]], 2).unwrap();
        assert_eq!(s, "(S(NN dog))");
        let s = build_tree(&["dog"], &cols(&[&["NN"]]), &[], 1).unwrap();
        assert_eq!(s, "(NN dog)");
    }

    #[test]
    fn round_trip_on_synthetic_treebank() {
        let c = synth_corpus(&SynthGrammar::default(), 500, 11).unwrap();
        for t in &c.trees {
            let enc = derive_gold_layers(t).unwrap();
            let s = build_tree(&enc.tokens, &enc.columns, &enc.codes, enc.height()).unwrap();
            assert_eq!(s, t.to_bracketed());
        }
    }

    #[test]
    fn n_ary_and_unary_nodes_round_trip() {
        for s in [
            "(S(NP(PRP he))(VP(VBD ran)))",
            "(FRAG(NP(DT a)(JJ b)(NN c)(NN d)))",
            "(S(ADVP(RB now))(NP(NNS dogs))(VP(VBD ran)(PP(IN to)(NP(NP(DT a)(NN park))(PP(IN in)(NP(NN town)))))))",
        ] {
            let t = parse_bracketed(s).unwrap();
            let enc = derive_gold_layers(&t).unwrap();
            assert_eq!(build_tree(&enc.tokens, &enc.columns, &enc.codes, enc.height()).unwrap(), s);
        }
    }

    #[test]
    fn category_change_inside_segment_is_rejected() {
        let columns = cols(&[&["DT", "NN"], &["NP", "VP"]]);
        let err = build_tree(&["a", "b"], &columns, &[vec![0, 0]], 2).unwrap_err();
        assert!(matches!(err, Error::Reconstruction { position: 2, .. }), "{err}");
    }

    #[test]
    fn crossing_segments_are_rejected() {
        let columns = cols(&[&["A", "B", "C"], &["X", "X", "C"], &["Y", "Z", "Z"], &["S", "S", "S"]]);
        let codes = vec![vec![0, 0, 1], vec![0, 1, 1], vec![0, 0, 0]];
        let err = build_tree(&["a", "b", "c"], &columns, &codes, 4).unwrap_err();
        assert!(matches!(err, Error::Reconstruction { position: 2, .. }), "{err}");
    }

    #[test]
    fn top_layer_must_be_single_segment() {
        let columns = cols(&[&["A", "B"], &["X", "Y"]]);
        assert!(build_tree(&["a", "b"], &columns, &[vec![0, 1]], 2).is_err());
    }

    #[test]
    fn missing_layers_are_rejected() {
        assert!(build_tree(&["a"], &cols(&[&["A"]]), &[], 2).is_err());
    }
}
