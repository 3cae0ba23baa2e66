//! Layer encodings of constituency trees.
//!
//! A node's layer is its height: preterminals sit at layer 1 and every
//! other node one above its tallest child. At layer `k` each token belongs
//! to the highest node on its leaf-to-root path whose height is at most
//! `k`; the spans of those nodes are the layer's segments, and their labels
//! form the layer's category column. Segments are written as alternating
//! binary codes starting from 0, so for
//! `(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))`
//! layer 2 is `0 1 0 0` and layer 3 is `0 1 1 1`.

use crate::corpus::ParseTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerEncoding {
    pub tokens: Vec<String>,
    /// `columns[k - 1]` is the category column of layer `k`, for
    /// `k = 1..=height`; `columns[0]` holds the POS tags.
    pub columns: Vec<Vec<String>>,
    /// `codes[k - 2]` is the binary code of layer `k`, for `k = 2..=height`.
    pub codes: Vec<Vec<u8>>,
}

impl LayerEncoding {
    /// Tree height `h_p`.
    pub fn height(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pos(&self) -> &[String] {
        &self.columns[0]
    }

    pub fn column(&self, k: usize) -> &[String] {
        &self.columns[k - 1]
    }

    /// Code of layer `k >= 2`.
    pub fn code(&self, k: usize) -> &[u8] {
        &self.codes[k - 2]
    }

    /// Segments of layer `k`; layer 1 has one segment per token.
    pub fn segments(&self, k: usize) -> Vec<(usize, usize)> {
        if k == 1 {
            (0..self.len()).map(|t| (t, t + 1)).collect()
        } else {
            code_spans(self.code(k)).expect("derived codes are valid")
        }
    }
}

struct NodeSpan<'a> {
    height: usize,
    start: usize,
    end: usize,
    label: &'a str,
}

fn collect<'a>(tree: &'a ParseTree, start: usize, out: &mut Vec<NodeSpan<'a>>) -> (usize, usize) {
    match tree {
        ParseTree::Leaf(_) => (0, start + 1),
        ParseTree::Node { label, children } => {
            let (mut height, mut end) = (0, start);
            for c in children {
                let (h, e) = collect(c, end, out);
                height = height.max(h);
                end = e;
            }
            out.push(NodeSpan {
                height: height + 1,
                start,
                end,
                label,
            });
            (height + 1, end)
        }
    }
}

pub fn derive_gold_layers(tree: &ParseTree) -> Result<LayerEncoding> {
    tree.validate()?;
    let mut nodes = Vec::new();
    let (height, len) = collect(tree, 0, &mut nodes);
    // Heights strictly increase along any leaf-to-root path, so for each
    // token the ancestors sorted by height form its path.
    let mut paths: Vec<Vec<&NodeSpan>> = vec![Vec::new(); len];
    for n in &nodes {
        for path in &mut paths[n.start..n.end] {
            path.push(n);
        }
    }
    for path in &mut paths {
        path.sort_by_key(|n| n.height);
    }
    let at_layer = |t: usize, k: usize| -> &NodeSpan {
        paths[t]
            .iter()
            .rev()
            .find(|n| n.height <= k)
            .expect("every token has a preterminal")
    };
    let mut columns = Vec::with_capacity(height);
    let mut codes = Vec::with_capacity(height.saturating_sub(1));
    for k in 1..=height {
        columns.push((0..len).map(|t| at_layer(t, k).label.to_string()).collect());
        if k >= 2 {
            let spans: Vec<(usize, usize)> = (0..len)
                .filter(|&t| at_layer(t, k).start == t)
                .map(|t| (t, at_layer(t, k).end))
                .collect();
            codes.push(spans_to_code(&spans, len));
        }
    }
    Ok(LayerEncoding {
        tokens: tree.tokens().into_iter().map(str::to_string).collect(),
        columns,
        codes,
    })
}

/// Maximal runs of equal bits, as half-open spans.
pub fn code_spans(code: &[u8]) -> Result<Vec<(usize, usize)>> {
    if code.is_empty() {
        return Err(Error::contract("empty layer code"));
    }
    if let Some(t) = code.iter().position(|&b| b > 1) {
        return Err(Error::contract(format!("layer code has non-binary value {} at {t}", code[t])));
    }
    let mut spans = Vec::new();
    let mut start = 0;
    for t in 1..=code.len() {
        if t == code.len() || code[t] != code[t - 1] {
            spans.push((start, t));
            start = t;
        }
    }
    Ok(spans)
}

/// Alternating code `0, 1, 0, ...` over consecutive spans.
pub fn spans_to_code(spans: &[(usize, usize)], len: usize) -> Vec<u8> {
    let mut code = vec![0u8; len];
    for (m, &(s, e)) in spans.iter().enumerate() {
        code[s..e].fill((m % 2) as u8);
    }
    code
}

/// Re-anchors a code so that it starts with 0.
pub fn normalize_code(code: &[u8]) -> Vec<u8> {
    match code.first() {
        Some(&1) => code.iter().map(|b| 1 - b).collect(),
        _ => code.to_vec(),
    }
}

/// Writes an encoding as text: a `tokens` line, one `column K` line per
/// layer and one `code K` line per layer from 2 up.
pub fn format_encoding(enc: &LayerEncoding) -> String {
    let mut out = format!("tokens {}\n", enc.tokens.join(" "));
    for k in 1..=enc.height() {
        out.push_str(&format!("column {k} {}\n", enc.column(k).join(" ")));
    }
    for k in 2..=enc.height() {
        let bits: Vec<String> = enc.code(k).iter().map(u8::to_string).collect();
        out.push_str(&format!("code {k} {}\n", bits.join(" ")));
    }
    out
}

/// Reads the format written by [`format_encoding`]. Blank lines and lines
/// starting with `#` are skipped; layers may appear in any order.
pub fn parse_encoding(text: &str) -> Result<LayerEncoding> {
    let mut tokens: Option<Vec<String>> = None;
    let mut columns: Vec<Option<Vec<String>>> = Vec::new();
    let mut codes: Vec<Option<Vec<u8>>> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        last_line = lineno;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Ingest { line: lineno, message };
        let mut words = line.split_whitespace();
        let key = words.next().unwrap_or_default();
        if key == "tokens" {
            tokens = Some(words.map(str::to_string).collect());
            continue;
        }
        let k: usize = words
            .next()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| err(format!("`{key}` needs a layer number")))?;
        let rest: Vec<&str> = words.collect();
        match key {
            "column" if k >= 1 => {
                if columns.len() < k {
                    columns.resize(k, None);
                }
                columns[k - 1] = Some(rest.iter().map(|w| w.to_string()).collect());
            }
            "code" if k >= 2 => {
                let bits = rest
                    .iter()
                    .map(|w| match *w {
                        "0" => Ok(0u8),
                        "1" => Ok(1u8),
                        other => Err(err(format!("code bit must be 0 or 1, got `{other}`"))),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                if codes.len() < k - 1 {
                    codes.resize(k - 1, None);
                }
                codes[k - 2] = Some(bits);
            }
            _ => return Err(err(format!("unexpected `{key} {k}`"))),
        }
    }
    let fail = |message: String| Error::Ingest { line: last_line, message };
    let tokens = tokens.ok_or_else(|| fail("missing `tokens` line".into()))?;
    let n = tokens.len();
    if n == 0 {
        return Err(fail("no tokens".into()));
    }
    let height = columns.len();
    if height == 0 {
        return Err(fail("no category columns".into()));
    }
    if codes.len() + 1 > height {
        return Err(fail(format!("code for layer {} above the top column", codes.len() + 1)));
    }
    let columns = columns
        .into_iter()
        .enumerate()
        .map(|(i, c)| match c {
            Some(c) if c.len() == n => Ok(c),
            Some(c) => Err(fail(format!("column {} has {} labels for {n} tokens", i + 1, c.len()))),
            None => Err(fail(format!("missing column {}", i + 1))),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut full_codes = Vec::with_capacity(height - 1);
    for k in 2..=height {
        match codes.get(k - 2).cloned().flatten() {
            Some(c) if c.len() == n => full_codes.push(c),
            Some(c) => return Err(fail(format!("code {k} has {} bits for {n} tokens", c.len()))),
            None => return Err(fail(format!("missing code {k}"))),
        }
    }
    Ok(LayerEncoding {
        tokens,
        columns,
        codes: full_codes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_bracketed;

    const JOHN: &str = "(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))";

    #[test]
    fn worked_example_codes() {
        let enc = derive_gold_layers(&parse_bracketed(JOHN).unwrap()).unwrap();
        assert_eq!(enc.height(), 4);
        assert_eq!(enc.code(2), &[0, 1, 0, 0]);
        assert_eq!(enc.code(3), &[0, 1, 1, 1]);
        assert_eq!(enc.code(4), &[0, 0, 0, 0]);
        assert_eq!(enc.column(1), &["NNP", "VBD", "DT", "NN"]);
        assert_eq!(enc.column(2), &["NNP", "VBD", "NP", "NP"]);
        assert_eq!(enc.column(3), &["NNP", "VP", "VP", "VP"]);
        assert_eq!(enc.column(4), &["S", "S", "S", "S"]);
        assert_eq!(enc.segments(2), vec![(0, 1), (1, 2), (2, 4)]);
    }

    #[test]
    fn single_token_tree() {
        let enc = derive_gold_layers(&parse_bracketed("(S (NN dog))").unwrap()).unwrap();
        assert_eq!(enc.height(), 2);
        assert_eq!(enc.code(2), &[0]);
        assert_eq!(enc.column(2), &["S"]);
    }

    #[test]
    fn adjacent_same_label_nodes_still_split() {
        let t = parse_bracketed("(S(NP(DT a)(NN b))(NP(DT c)(NN d)))").unwrap();
        let enc = derive_gold_layers(&t).unwrap();
        assert_eq!(enc.code(2), &[0, 0, 1, 1]);
    }

    #[test]
    fn malformed_tree_is_structure_error() {
        let t = ParseTree::node("S", vec![ParseTree::Leaf("x".into()), ParseTree::preterminal("NN", "y")]);
        assert!(matches!(derive_gold_layers(&t), Err(Error::Structure(_))));
    }

    #[test]
    fn code_helpers() {
        assert_eq!(code_spans(&[0, 1, 1, 0]).unwrap(), vec![(0, 1), (1, 3), (3, 4)]);
        assert!(code_spans(&[0, 2]).is_err());
        assert!(code_spans(&[]).is_err());
        assert_eq!(spans_to_code(&[(0, 2), (2, 3), (3, 5)], 5), vec![0, 0, 1, 0, 0]);
        assert_eq!(normalize_code(&[1, 1, 0]), vec![0, 0, 1]);
    }
    #[test]
    fn encoding_text_round_trip() {
        let enc = derive_gold_layers(&parse_bracketed(JOHN).unwrap()).unwrap();
        let text = format_encoding(&enc);
        assert!(text.contains("code 2 0 1 0 0\n"));
        assert_eq!(parse_encoding(&text).unwrap(), enc);
    }

    #[test]
    fn encoding_text_errors() {
        assert!(matches!(parse_encoding("column 1 A"), Err(Error::Ingest { .. })));
        let bad_bit = "tokens a b\ncolumn 1 X Y\ncolumn 2 Z Z\ncode 2 0 2\n";
        assert!(matches!(parse_encoding(bad_bit), Err(Error::Ingest { line: 4, .. })));
        let short = "tokens a b\ncolumn 1 X\n";
        assert!(parse_encoding(short).is_err());
        let missing_code = "tokens a b\ncolumn 1 X Y\ncolumn 2 Z Z\n";
        assert!(parse_encoding(missing_code).is_err());
    }
}
