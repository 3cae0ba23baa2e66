//! Caption records: `id<TAB>f_1 f_2 ... f_n<TAB>reference one|reference two`.
//!
//! Feature vectors are precomputed elsewhere; every record in a file must
//! share the same dimension.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub references: Vec<Vec<String>>,
}

pub fn parse_captions(text: &str) -> Result<Vec<CaptionRecord>> {
    let mut out: Vec<CaptionRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, feats, refs] = fields.as_slice() else {
            return Err(Error::Ingest {
                line: lineno,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        let features: Vec<f64> = feats
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Ingest {
                        line: lineno,
                        message: format!("record `{id}`: malformed float `{s}`"),
                    })
            })
            .collect::<Result<_>>()?;
        if features.is_empty() {
            return Err(Error::Ingest {
                line: lineno,
                message: format!("record `{id}` has no features"),
            });
        }
        if let Some(first) = out.first() {
            if first.features.len() != features.len() {
                return Err(Error::Ingest {
                    line: lineno,
                    message: format!(
                        "record `{id}` has {} features, expected {}",
                        features.len(),
                        first.features.len()
                    ),
                });
            }
        }
        let references = refs
            .split('|')
            .map(|r| r.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect();
        out.push(CaptionRecord {
            id: id.to_string(),
            features,
            references,
        });
    }
    if out.is_empty() {
        warn!("caption file contains no records");
    }
    Ok(out)
}

pub fn format_caption(rec: &CaptionRecord) -> String {
    let feats: Vec<String> = rec.features.iter().map(|x| x.to_string()).collect();
    let refs: Vec<String> = rec.references.iter().map(|r| r.join(" ")).collect();
    format!("{}\t{}\t{}", rec.id, feats.join(" "), refs.join("|"))
}

/// Deterministic stand-in for image features: each sentence maps to
/// `tanh(Σ_t P_t[:, token_t])`, with a fixed random projection `P_t` per
/// position, so the vector determines the sentence.
pub fn synthesize_features(sentences: &[Vec<String>], vocab: &Vocabulary, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let max_len = sentences.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projections: Vec<Tensor> = (0..max_len)
        .map(|_| Tensor::uniform(&[dim, vocab.len()], 1.0, &mut rng))
        .collect();
    sentences
        .iter()
        .map(|s| {
            let mut acc = vec![0.0; dim];
            for (t, tok) in s.iter().enumerate() {
                let col = vocab.encode(tok);
                for (r, a) in acc.iter_mut().enumerate() {
                    *a += projections[t].at(r, col);
                }
            }
            acc.into_iter().map(f64::tanh).collect()
        })
        .collect()
}
