//! Bracketed constituency trees: `(S(NNP John)(VP(VBD hit)(NP(DT the)(NN ball))))`.
//!
//! Reading accepts any whitespace between brackets, and a PTB-style
//! unlabeled outer wrapper `( (S ...) )`. Writing produces the compact
//! normalized form shown above: no space before `(`, one space between a
//! preterminal label and its token.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ParseTree {
    Node { label: String, children: Vec<ParseTree> },
    Leaf(String),
}

/// A labeled span `[start, end)` over token positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constituent {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl ParseTree {
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        ParseTree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn preterminal(tag: impl Into<String>, token: impl Into<String>) -> Self {
        ParseTree::node(tag, vec![ParseTree::Leaf(token.into())])
    }

    pub fn label(&self) -> &str {
        match self {
            ParseTree::Node { label, .. } => label,
            ParseTree::Leaf(t) => t,
        }
    }

    pub fn children(&self) -> &[ParseTree] {
        match self {
            ParseTree::Node { children, .. } => children,
            ParseTree::Leaf(_) => &[],
        }
    }

    pub fn is_preterminal(&self) -> bool {
        matches!(self.children(), [ParseTree::Leaf(_)])
    }

    /// Number of tokens under this node.
    pub fn len(&self) -> usize {
        match self {
            ParseTree::Leaf(_) => 1,
            ParseTree::Node { children, .. } => children.iter().map(ParseTree::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_leaves(&mut |pre, tok| {
            let _ = pre;
            out.push(tok);
        });
        out
    }

    /// Preterminal labels, one per token.
    pub fn tags(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_leaves(&mut |pre, _| out.push(pre));
        out
    }

    fn walk_leaves<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a str)) {
        match self {
            ParseTree::Node { label, children } => {
                if let [ParseTree::Leaf(tok)] = children.as_slice() {
                    f(label, tok);
                } else {
                    for c in children {
                        c.walk_leaves(f);
                    }
                }
            }
            ParseTree::Leaf(tok) => f("", tok),
        }
    }

    /// Checks that every token sits under its own preterminal and that no
    /// node mixes tokens with subtrees.
    pub fn validate(&self) -> Result<()> {
        match self {
            ParseTree::Leaf(t) => Err(Error::Structure(format!("bare token `{t}` without a preterminal"))),
            ParseTree::Node { label, children } => {
                if children.is_empty() {
                    return Err(Error::Structure(format!("node `{label}` has no children")));
                }
                if self.is_preterminal() {
                    return Ok(());
                }
                for c in children {
                    if let ParseTree::Leaf(t) = c {
                        return Err(Error::Structure(format!(
                            "token `{t}` under `{label}` shares its parent with other children"
                        )));
                    }
                    c.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Height with preterminals at 1 and a parent one above its tallest child.
    pub fn height(&self) -> usize {
        match self {
            ParseTree::Leaf(_) => 0,
            ParseTree::Node { children, .. } => 1 + children.iter().map(ParseTree::height).max().unwrap_or(0),
        }
    }

    /// Labeled spans of every internal node above the preterminals.
    pub fn constituents(&self) -> Vec<Constituent> {
        let mut out = Vec::new();
        self.collect_constituents(0, &mut out);
        out
    }

    fn collect_constituents(&self, start: usize, out: &mut Vec<Constituent>) -> usize {
        match self {
            ParseTree::Leaf(_) => start + 1,
            ParseTree::Node { label, children } => {
                let mut end = start;
                for c in children {
                    end = c.collect_constituents(end, out);
                }
                if !self.is_preterminal() {
                    out.push(Constituent {
                        label: label.clone(),
                        start,
                        end,
                    });
                }
                end
            }
        }
    }

    pub fn to_bracketed(&self) -> String {
        let mut s = String::new();
        self.write_to(&mut s);
        s
    }

    fn write_to(&self, s: &mut String) {
        match self {
            ParseTree::Leaf(t) => {
                s.push(' ');
                s.push_str(t);
            }
            ParseTree::Node { label, children } => {
                s.push('(');
                s.push_str(label);
                for c in children {
                    c.write_to(s);
                }
                s.push(')');
            }
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex<'a>(line: &'a str) -> Vec<(usize, Tok<'a>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let flush = |start: &mut Option<usize>, end: usize, out: &mut Vec<(usize, Tok<'a>)>| {
        if let Some(s) = start.take() {
            out.push((s, Tok::Atom(&line[s..end])));
        }
    };
    for (i, ch) in line.char_indices() {
        match ch {
            '(' | ')' => {
                flush(&mut start, i, &mut out);
                out.push((i, if ch == '(' { Tok::Open } else { Tok::Close }));
            }
            c if c.is_whitespace() => flush(&mut start, i, &mut out),
            _ => {
                if start.is_none() {
                    start = Some(i);
                }
            }
        }
    }
    flush(&mut start, line.len(), &mut out);
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    line: &'a str,
}

impl<'a> Parser<'a> {
    fn column(&self, byte: usize) -> usize {
        self.line[..byte].chars().count() + 1
    }

    fn err_here(&self, message: impl Into<String>) -> Error {
        let byte = self.toks.get(self.pos).map_or(self.line.len(), |t| t.0);
        Error::Parse {
            column: self.column(byte),
            message: message.into(),
        }
    }

    fn err_at(&self, byte: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            column: self.column(byte),
            message: message.into(),
        }
    }

    fn tree(&mut self) -> Result<ParseTree> {
        let open = match self.toks.get(self.pos) {
            Some(&(byte, Tok::Open)) => {
                self.pos += 1;
                byte
            }
            _ => return Err(self.err_here("expected `(`")),
        };

        let label = match self.toks.get(self.pos) {
            Some((_, Tok::Atom(a))) => {
                self.pos += 1;
                Some(a.to_string())
            }
            _ => None,
        };
        let mut children = Vec::new();
        loop {
            match self.toks.get(self.pos) {
                Some((_, Tok::Close)) => {
                    self.pos += 1;
                    break;
                }
                Some((_, Tok::Open)) => children.push(self.tree()?),
                Some((_, Tok::Atom(a))) => {
                    children.push(ParseTree::Leaf(a.to_string()));
                    self.pos += 1;
                }
                None => return Err(self.err_here("unbalanced parentheses: missing `)`")),
            }
        }
        match label {
            Some(label) => {
                if children.is_empty() {
                    return Err(self.err_at(open, format!("node `{label}` is empty")));
                }
                Ok(ParseTree::Node { label, children })
            }
            // PTB wraps each tree in an unlabeled bracket.
            None => match children.len() {
                1 if !matches!(children[0], ParseTree::Leaf(_)) => Ok(children.pop().unwrap()),
                _ => Err(self.err_at(open, "unlabeled node must wrap exactly one tree")),
            },
        }
    }
}

/// Parses one bracketed tree.
pub fn parse_bracketed(line: &str) -> Result<ParseTree> {
    let toks = lex(line);
    if toks.is_empty() {
        return Err(Error::Parse {
            column: 1,
            message: "empty input".into(),
        });
    }
    let mut p = Parser { toks, pos: 0, line };
    let tree = p.tree()?;
    if p.pos < p.toks.len() {
        return Err(p.err_here("trailing input after tree (unbalanced `)`?)"));
    }
    tree.validate().map_err(|e| Error::Parse {
        column: 1,
        message: e.to_string(),
    })?;
    Ok(tree)
}

/// One tree per non-empty line.
pub fn parse_treebank(text: &str) -> Result<Vec<ParseTree>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_bracketed(l).map_err(|e| Error::Ingest {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
