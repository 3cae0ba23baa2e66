//! Labeled bracket scoring. Constituents are `(label, span)` pairs of the
//! nodes above the preterminals, matched as multisets.

use std::collections::HashMap;

use crate::corpus::{Constituent, ParseTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parseval {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Parseval {
    fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        if predicted == 0 && gold == 0 {
            return Parseval {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                matched,
                predicted,
                gold,
            };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Parseval {
            precision,
            recall,
            f1,
            matched,
            predicted,
            gold,
        }
    }
}

fn counts(tree: &ParseTree) -> HashMap<Constituent, usize> {
    let mut m = HashMap::new();
    for c in tree.constituents() {
        *m.entry(c).or_insert(0) += 1;
    }
    m
}

/// Corpus-level labeled precision, recall and F1.
pub fn parseval_score(predicted: &[ParseTree], gold: &[ParseTree]) -> Result<Parseval> {
    if predicted.len() != gold.len() {
        return Err(Error::contract(format!(
            "{} predicted trees for {} gold trees",
            predicted.len(),
            gold.len()
        )));
    }
    let (mut matched, mut n_pred, mut n_gold) = (0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        let (pc, gc) = (counts(p), counts(g));
        n_pred += pc.values().sum::<usize>();
        n_gold += gc.values().sum::<usize>();
        matched += pc
            .iter()
            .map(|(c, &n)| n.min(gc.get(c).copied().unwrap_or(0)))
            .sum::<usize>();
    }
    Ok(Parseval::from_counts(matched, n_pred, n_gold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_bracketed;

    fn t(s: &str) -> ParseTree {
        parse_bracketed(s).unwrap()
    }

    #[test]
    fn identical_trees_score_one() {
        let g = vec![t("(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))")];
        let s = parseval_score(&g, &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        assert_eq!(s.gold, 3);
    }

    #[test]
    fn spurious_constituent_lowers_precision_only() {
        let gold = vec![t("(S(NP(DT a)(NN b))(VBD c))")];
        let pred = vec![t("(S(X(NP(DT a)(NN b)))(VBD c))")];
        let s = parseval_score(&pred, &gold).unwrap();
        assert_eq!(s.recall, 1.0);
        assert!(s.precision < 1.0);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn labels_matter() {
        let gold = vec![t("(S(NP(DT a)(NN b))(VBD c))")];
        let pred = vec![t("(S(VP(DT a)(NN b))(VBD c))")];
        let s = parseval_score(&pred, &gold).unwrap();
        assert_eq!(s.matched, 1);
        assert_eq!(s.f1, 0.5);
    }

    #[test]
    fn preterminal_only_trees_score_one() {
        let g = vec![t("(NN dog)")];
        assert_eq!(parseval_score(&g, &g).unwrap().f1, 1.0);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(parseval_score(&[t("(NN a)")], &[]).is_err());
    }
}
