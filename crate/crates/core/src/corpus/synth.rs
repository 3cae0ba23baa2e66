//! Weighted context-free grammar sampler for desk-scale treebanks.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::treebank::ParseTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub lhs: String,
    pub rhs: Vec<String>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SynthGrammar {
    /// Weighted choice of root category.
    pub start: Vec<(String, f64)>,
    pub productions: Vec<Production>,
    /// POS tag → words. Each word belongs to exactly one tag.
    pub lexicon: BTreeMap<String, Vec<String>>,
    /// Sentences outside `[min_len, max_len]` are resampled.
    pub min_len: usize,
    pub max_len: usize,
    /// Derivations deeper than this are abandoned.
    pub max_depth: usize,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub trees: Vec<ParseTree>,
    pub sentences: Vec<Vec<String>>,
    pub tags: Vec<Vec<String>>,
}

const MAX_ATTEMPTS: usize = 10_000;

fn rule(lhs: &str, rhs: &str, weight: f64) -> Production {
    Production {
        lhs: lhs.to_string(),
        rhs: rhs.split_whitespace().map(str::to_string).collect(),
        weight,
    }
}

impl Default for SynthGrammar {
    /// The shipped English-like toy grammar: 8 POS tags, 54 words and 9
    /// phrasal categories. No category ever rewrites to itself alone.
    fn default() -> Self {
        let productions = vec![
            rule("S", "NP VP", 0.8),
            rule("S", "ADVP NP VP", 0.2),
            rule("FRAG", "NP PP", 1.0),
            rule("SBAR", "IN S", 1.0),
            rule("NP", "DT NN", 0.35),
            rule("NP", "DT NX", 0.12),
            rule("NP", "PRP", 0.18),
            rule("NP", "NNS", 0.15),
            rule("NP", "NP PP", 0.2),
            rule("NX", "ADJP NN", 0.4),
            rule("NX", "JJ NN", 0.6),
            rule("VP", "VBD NP", 0.45),
            rule("VP", "VBD", 0.12),
            rule("VP", "VBD NP PP", 0.18),
            rule("VP", "VBD ADVP", 0.1),
            rule("VP", "VBD SBAR", 0.08),
            rule("VP", "VBD ADJP", 0.07),
            rule("PP", "IN NP", 1.0),
            rule("ADJP", "RB JJ", 0.5),
            rule("ADJP", "JJ", 0.5),
            rule("ADVP", "RB", 1.0),
        ];
        let words = |ws: &str| ws.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let lexicon = BTreeMap::from([
            ("DT".to_string(), words("the a every some this")),
            (
                "NN".to_string(),
                words("dog cat man woman park ball telescope house car bird tree book"),
            ),
            ("NNS".to_string(), words("dogs cats people children birds cars")),
            (
                "VBD".to_string(),
                words("saw liked chased found took heard wanted said knew thought"),
            ),
            ("JJ".to_string(), words("big small red old young happy")),
            ("IN".to_string(), words("in on with near that")),
            ("PRP".to_string(), words("he she they we it")),
            ("RB".to_string(), words("very quickly often today really")),
        ]);
        SynthGrammar {
            start: vec![("S".to_string(), 0.9), ("FRAG".to_string(), 0.1)],
            productions,
            lexicon,
            min_len: 2,
            max_len: 12,
            max_depth: 24,
        }
    }
}

impl SynthGrammar {
    pub fn pos_tags(&self) -> Vec<&str> {
        self.lexicon.keys().map(String::as_str).collect()
    }

    pub fn phrasal_categories(&self) -> BTreeSet<&str> {
        self.productions.iter().map(|p| p.lhs.as_str()).collect()
    }

    pub fn words(&self) -> Vec<&str> {
        self.lexicon.values().flatten().map(String::as_str).collect()
    }

    /// Tag of a word, when the word is in the lexicon.
    pub fn tag_of(&self, word: &str) -> Option<&str> {
        self.lexicon
            .iter()
            .find(|(_, ws)| ws.iter().any(|w| w == word))
            .map(|(t, _)| t.as_str())
    }

    /// Checks that every symbol is defined, every weight is positive and
    /// every category can derive a terminal string.
    pub fn validate(&self) -> Result<()> {
        let cats = self.phrasal_categories();
        let is_known = |s: &str| cats.contains(s) || self.lexicon.contains_key(s);
        if self.start.is_empty() {
            return Err(Error::Generation("grammar has no start category".into()));
        }
        for (s, w) in &self.start {
            if !is_known(s) || !(*w > 0.0) {
                return Err(Error::Generation(format!("bad start category `{s}` (weight {w})")));
            }
        }
        for p in &self.productions {
            if p.rhs.is_empty() || !(p.weight > 0.0) {
                return Err(Error::Generation(format!("bad production for `{}`", p.lhs)));
            }
            if let Some(s) = p.rhs.iter().find(|s| !is_known(s)) {
                return Err(Error::Generation(format!("undefined symbol `{s}` in `{}` rule", p.lhs)));
            }
        }
        for (tag, ws) in &self.lexicon {
            if ws.is_empty() {
                return Err(Error::Generation(format!("tag `{tag}` has no words")));
            }
        }
        let mut seen = BTreeSet::new();
        for w in self.words() {
            if !seen.insert(w) {
                return Err(Error::Generation(format!("word `{w}` has more than one tag")));
            }
        }
        let mut productive: BTreeSet<&str> = self.lexicon.keys().map(String::as_str).collect();
        loop {
            let before = productive.len();
            for p in &self.productions {
                if p.rhs.iter().all(|s| productive.contains(s.as_str())) {
                    productive.insert(&p.lhs);
                }
            }
            if productive.len() == before {
                break;
            }
        }
        if let Some(c) = cats.iter().find(|c| !productive.contains(*c)) {
            return Err(Error::Generation(format!("category `{c}` derives no terminal string")));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Generation(format!(
                "bad length bounds [{}, {}]",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }

    fn pick<'a, R: Rng, T>(rng: &mut R, items: &'a [T], weight: impl Fn(&T) -> f64) -> &'a T {
        let total: f64 = items.iter().map(&weight).sum();
        let mut x = rng.gen::<f64>() * total;
        for it in items {
            x -= weight(it);
            if x < 0.0 {
                return it;
            }
        }
        items.last().expect("non-empty choice")
    }

    fn derive<R: Rng>(&self, symbol: &str, depth: usize, budget: &mut usize, rng: &mut R) -> Option<ParseTree> {
        if depth > self.max_depth {
            return None;
        }
        if let Some(words) = self.lexicon.get(symbol) {
            if *budget == 0 {
                return None;
            }
            *budget -= 1;
            let w = &words[rng.gen_range(0..words.len())];
            return Some(ParseTree::preterminal(symbol, w.clone()));
        }
        let options: Vec<&Production> = self.productions.iter().filter(|p| p.lhs == symbol).collect();
        let p = Self::pick(rng, &options, |p| p.weight);
        let mut children = Vec::with_capacity(p.rhs.len());
        for s in &p.rhs {
            children.push(self.derive(s, depth + 1, budget, rng)?);
        }
        Some(ParseTree::node(symbol, children))
    }

    /// Samples one tree whose length lies in `[min_len, max_len]`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<ParseTree> {
        for _ in 0..MAX_ATTEMPTS {
            let (root, _) = Self::pick(rng, &self.start, |s| s.1);
            let mut budget = self.max_len;
            if let Some(t) = self.derive(root, 0, &mut budget, rng) {
                if t.len() >= self.min_len {
                    return Ok(t);
                }
            }
        }
        Err(Error::Generation(format!(
            "no derivation within depth {} and length [{}, {}] after {MAX_ATTEMPTS} attempts",
            self.max_depth, self.min_len, self.max_len
        )))
    }
}

/// Samples `n` trees deterministically from `seed`.
pub fn synth_corpus(grammar: &SynthGrammar, n: usize, seed: u64) -> Result<SynthCorpus> {
    grammar.validate()?;
    if n == 0 {
        return Err(Error::contract("synth_corpus needs n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trees = (0..n).map(|_| grammar.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    let sentences = trees
        .iter()
        .map(|t| t.tokens().into_iter().map(str::to_string).collect())
        .collect();
    let tags = trees
        .iter()
        .map(|t| t.tags().into_iter().map(str::to_string).collect())
        .collect();
    Ok(SynthCorpus { trees, sentences, tags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::treebank::parse_bracketed;

    #[test]
    fn default_grammar_shape() {
        let g = SynthGrammar::default();
        g.validate().unwrap();
        assert_eq!(g.pos_tags().len(), 8);
        assert_eq!(g.words().len(), 54);
        assert_eq!(g.phrasal_categories().len(), 9);
    }

    #[test]
    fn deterministic_per_seed() {
        let g = SynthGrammar::default();
        let a = synth_corpus(&g, 50, 9).unwrap();
        let b = synth_corpus(&g, 50, 9).unwrap();
        assert_eq!(a.trees, b.trees);
        let c = synth_corpus(&g, 50, 10).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn lengths_within_bounds_and_tags_from_lexicon() {
        let g = SynthGrammar::default();
        let c = synth_corpus(&g, 500, 1).unwrap();
        let tags = g.pos_tags();
        for (s, ts) in c.sentences.iter().zip(&c.tags) {
            assert!((2..=12).contains(&s.len()), "{s:?}");
            for (w, t) in s.iter().zip(ts) {
                assert!(tags.contains(&t.as_str()));
                assert_eq!(g.tag_of(w), Some(t.as_str()));
            }
        }
    }

    #[test]
    fn trees_round_trip_through_bracketed_text() {
        let c = synth_corpus(&SynthGrammar::default(), 500, 2).unwrap();
        for t in &c.trees {
            let s = t.to_bracketed();
            assert_eq!(parse_bracketed(&s).unwrap().to_bracketed(), s);
        }
    }

    #[test]
    fn non_terminating_grammar_is_detected() {
        let mut g = SynthGrammar::default();
        g.productions = vec![rule("S", "S S", 1.0), rule("FRAG", "NN", 1.0)];
        g.start = vec![("S".into(), 1.0)];
        assert!(matches!(synth_corpus(&g, 1, 0), Err(Error::Generation(_))));

        // Productive on paper, but the depth cap always trips.
        let mut g = SynthGrammar::default();
        g.productions = vec![rule("S", "S NN", 0.999), rule("S", "NN", 0.001)];
        g.start = vec![("S".into(), 1.0)];
        g.max_depth = 3;
        g.min_len = 5;
        assert!(matches!(synth_corpus(&g, 1, 0), Err(Error::Generation(_))));
    }
}
