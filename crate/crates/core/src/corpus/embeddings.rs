//! Word-vector files: one token per line, followed by `d` space-separated floats.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;
use rand::Rng;

use crate::corpus::vocab::Vocabulary;
use crate::decoder::center_rows;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    File,
    Random,
}

/// `d×V` embedding matrix; column `j` embeds token `j`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub matrix: Tensor,
    pub source: EmbeddingSource,
    /// Number of vocabulary entries covered by the file.
    pub covered: usize,
}

pub fn parse_embeddings(text: &str, vocab: &Vocabulary, d: usize, rng: &mut impl Rng) -> Result<EmbeddingTable> {
    let mut found: HashMap<usize, Vec<f64>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<f64> = fields
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Ingest {
                    line: lineno,
                    message: format!("bad float `{s}`"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(Error::Ingest {
                line: lineno,
                message: format!("expected {d} values for `{token}`, found {}", values.len()),
            });
        }
        if let Some(id) = vocab.get(token) {
            found.entry(id).or_insert(values);
        }
    }

    let v = vocab.len();
    let mut matrix = Tensor::zeros(&[d, v]);
    if !found.is_empty() {
        // Center the loaded vectors before filling gaps.
        let mut mean = vec![0.0; d];
        for vals in found.values() {
            for (m, x) in mean.iter_mut().zip(vals) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= found.len() as f64);
        for (&id, vals) in &found {
            for r in 0..d {
                matrix.set(r, id, vals[r] - mean[r]);
            }
        }
    }
    let a = (6.0 / (d + v) as f64).sqrt();
    let mut ids: Vec<usize> = (0..v).filter(|id| !found.contains_key(id)).collect();
    ids.sort_unstable();
    for id in ids {
        for r in 0..d {
            matrix.set(r, id, rng.gen_range(-a..=a));
        }
    }
    let source = if found.is_empty() {
        warn!("no embedding-file token overlaps the vocabulary; using random embeddings");
        center_rows(&mut matrix);
        EmbeddingSource::Random
    } else {
        EmbeddingSource::File
    };
    Ok(EmbeddingTable {
        matrix,
        source,
        covered: found.len(),
    })
}

pub fn load_embeddings(path: &Path, vocab: &Vocabulary, d: usize, rng: &mut impl Rng) -> Result<EmbeddingTable> {
    parse_embeddings(&fs::read_to_string(path)?, vocab, d, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::{EOS, UNK};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["a", "b", "c", EOS, UNK].map(String::from).to_vec()).unwrap()
    }

    #[test]
    fn full_coverage_is_centered() {
        let text = "a 1 2\nb 3 -4\nc 0.5 9\n</s> 7 7\n<unk> -1 1\n";
        let t = parse_embeddings(text, &vocab(), 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.source, EmbeddingSource::File);
        assert_eq!(t.covered, 5);
        for r in 0..2 {
            assert!(t.matrix.row(r).iter().sum::<f64>().abs() / 5.0 < 1e-10);
        }
    }

    #[test]
    fn no_overlap_falls_back_to_random() {
        let t = parse_embeddings("zzz 1 2\n", &vocab(), 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.source, EmbeddingSource::Random);
        assert_eq!(t.matrix.shape(), &[2, 5]);
    }

    #[test]
    fn dimension_mismatch_and_bad_float() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = parse_embeddings("a 1 2\nb 1 2 3\n", &vocab(), 2, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 2, .. }));
        let err = parse_embeddings("a 1 x\n", &vocab(), 2, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
    }
}
