//! Tagged sentences, one per line: `token_TAG token_TAG ...`.
//! The tag is everything after the last underscore.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

pub fn parse_tagged(text: &str) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut s = TaggedSentence {
            tokens: Vec::new(),
            tags: Vec::new(),
        };
        for pair in line.split_whitespace() {
            match pair.rsplit_once('_') {
                Some((tok, tag)) if !tok.is_empty() && !tag.is_empty() => {
                    s.tokens.push(tok.to_string());
                    s.tags.push(tag.to_string());
                }
                _ => {
                    return Err(Error::Ingest {
                        line: i + 1,
                        message: format!("expected `token_TAG`, found `{pair}`"),
                    })
                }
            }
        }
        out.push(s);
    }
    Ok(out)
}

pub fn format_tagged(tokens: &[impl AsRef<str>], tags: &[impl AsRef<str>]) -> String {
    tokens
        .iter()
        .zip(tags)
        .map(|(t, g)| format!("{}_{}", t.as_ref(), g.as_ref()))
        .collect::<Vec<_>>()
        .join(" ")
}
