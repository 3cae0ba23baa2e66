//! Constituency parsing over unbinding vectors.

pub mod build;
pub mod eval;
pub mod layers;
pub mod model;

pub use build::build_tree;
pub use eval::{parseval_score, Parseval};
pub use layers::{code_spans, derive_gold_layers, format_encoding, normalize_code, parse_encoding, spans_to_code, LayerEncoding};
pub use model::{label_sets, train_parser, ParseResult, Parser, ParserConfig, ParserExample, ParserLayer};
