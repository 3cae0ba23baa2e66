//! Corpus-level BLEU with clipped n-gram precision and brevity penalty.
//!
//! A zero n-gram precision is floored at [`ZERO_PRECISION_FLOOR`] instead of
//! collapsing the geometric mean to zero.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const ZERO_PRECISION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// `scores[n-1]` is BLEU-n.
    pub scores: Vec<f64>,
    /// Clipped modified precision per order.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_default() += 1;
        }
    }
    m
}

pub fn bleu_score<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<Vec<S>>], max_n: usize) -> Result<BleuScore> {
    if candidates.len() != references.len() {
        return Err(Error::contract(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::contract("BLEU needs max_n >= 1"));
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        c_len += cand.len();
        // Closest reference length, shorter on ties.
        if let Some(r) = refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
        {
            r_len += r;
        }
        for n in 1..=max_n {
            let cand_counts = ngram_counts(cand, n);
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_default();
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &cand_counts {
                matched[n - 1] += (*c).min(max_ref.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }
    let precisions: Vec<f64> = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if c_len == 0 {
        0.0
    } else if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    let mut log_sum = 0.0;
    let scores = precisions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            log_sum += p.max(ZERO_PRECISION_FLOOR).ln();
            brevity_penalty * (log_sum / (i + 1) as f64).exp()
        })
        .collect();
    Ok(BleuScore {
        scores,
        precisions,
        brevity_penalty,
        candidate_len: c_len,
        reference_len: r_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_candidate_scores_one() {
        let c = vec![toks("the cat sat on the mat")];
        let r = vec![vec![toks("the cat sat on the mat")]];
        let b = bleu_score(&c, &r, 4).unwrap();
        assert_eq!(b.scores, vec![1.0; 4]);
    }

    #[test]
    fn disjoint_vocabulary() {
        let b = bleu_score(&[toks("a b c d")], &[vec![toks("w x y z")]], 4).unwrap();
        assert!(b.scores[0] <= 1e-6);
    }

    #[test]
    fn clipping_limits_repeated_words() {
        let b = bleu_score(&[toks("the the the the")], &[vec![toks("the cat")]], 1).unwrap();
        assert_eq!(b.precisions[0], 0.25);
    }

    #[test]
    fn brevity_penalty_for_short_candidates() {
        let b = bleu_score(&[toks("the cat")], &[vec![toks("the cat sat on the mat")]], 1).unwrap();
        assert!((b.brevity_penalty - (1.0f64 - 3.0).exp()).abs() < 1e-15);
        assert!(b.scores[0] < 1.0);
    }

    #[test]
    fn closest_reference_length_prefers_shorter_on_tie() {
        let b = bleu_score(&[toks("a b c")], &[vec![toks("a b c d"), toks("a b")]], 1).unwrap();
        assert_eq!(b.reference_len, 2);
    }

    #[test]
    fn empty_candidate_contributes_nothing() {
        let b = bleu_score(&[toks("")], &[vec![toks("a b")]], 2).unwrap();
        assert_eq!(b.scores, vec![0.0, 0.0]);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(bleu_score(&[toks("a")], &Vec::<Vec<Vec<String>>>::new(), 4).is_err());
    }

    #[test]
    fn corpus_order_does_not_matter() {
        let c = vec![toks("a b c d"), toks("x y"), toks("p q r")];
        let r = vec![vec![toks("a b d c")], vec![toks("x y z")], vec![toks("p r q")]];
        let fwd = bleu_score(&c, &r, 4).unwrap();
        let rc: Vec<_> = c.iter().rev().cloned().collect();
        let rr: Vec<_> = r.iter().rev().cloned().collect();
        assert_eq!(fwd, bleu_score(&rc, &rr, 4).unwrap());
    }
}
