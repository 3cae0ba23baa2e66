pub mod autodiff;
pub mod autoencoder;
pub mod blocks;
pub mod cli;
pub mod config;
pub mod captioner;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod gradsuite;
pub mod labeler;
pub mod parser;
pub mod pipeline;
pub mod tagger;
pub mod tensor;
pub mod tpr;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
