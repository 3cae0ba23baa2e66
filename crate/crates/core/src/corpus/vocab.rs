use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Dense token ↔ id mapping. Corpus tokens come first, ordered by
/// descending frequency then lexicographically; `</s>` and `<unk>` follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(sentences: &[Vec<S>]) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            for tok in s {
                let tok = tok.as_ref();
                if tok != EOS && tok != UNK {
                    *counts.entry(tok).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let tokens = ranked
            .into_iter()
            .map(|(t, _)| t.to_string())
            .chain([EOS.to_string(), UNK.to_string()])
            .collect();
        Self::from_tokens(tokens).expect("built vocabulary is valid")
    }

    /// Vocabulary from an explicit id order; reserved tokens must be present.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::contract(format!("duplicate vocabulary entry `{t}`")));
            }
        }
        for reserved in [EOS, UNK] {
            if !index.contains_key(reserved) {
                return Err(Error::contract(format!("vocabulary lacks reserved token `{reserved}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> usize {
        self.index[EOS]
    }

    pub fn unk(&self) -> usize {
        self.index[UNK]
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown id.
    pub fn encode(&self, token: &str) -> usize {
        self.get(token).unwrap_or_else(|| self.unk())
    }

    /// Encodes a sentence, rejecting out-of-vocabulary tokens.
    pub fn encode_strict<S: AsRef<str>>(&self, sentence: &[S], line: usize) -> Result<Vec<usize>> {
        sentence
            .iter()
            .map(|t| {
                self.get(t.as_ref()).ok_or_else(|| Error::Ingest {
                    line,
                    message: format!("out-of-vocabulary token `{}`", t.as_ref()),
                })
            })
            .collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for t in &self.tokens {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let v = Vocabulary::build(&corpus(&["a a b"]));
        assert_eq!(v.tokens(), &["a", "b", EOS, UNK]);
        let v = Vocabulary::build(&corpus(&["c b a b c"]));
        assert_eq!(v.tokens(), &["b", "c", "a", EOS, UNK]);
    }

    #[test]
    fn deterministic_and_invertible() {
        let c = corpus(&["the dog saw a cat", "a cat saw the dog"]);
        let v = Vocabulary::build(&c);
        assert_eq!(v, Vocabulary::build(&c));
        for s in &c {
            let ids = v.encode_strict(s, 1).unwrap();
            assert_eq!(v.decode(&ids), s.iter().map(String::as_str).collect::<Vec<_>>());
        }
    }

    #[test]
    fn oov_handling() {
        let v = Vocabulary::build(&corpus(&["x y"]));
        assert_eq!(v.encode("zebra"), v.unk());
        let err = v.encode_strict(&["x", "zebra"], 7).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 7, ref message } if message.contains("zebra")));
    }
}
