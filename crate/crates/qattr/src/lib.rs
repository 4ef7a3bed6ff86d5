//! Stylometric character embeddings, authorship verification over drama
//! corpora, and quotation attribution for annotated novels.
//!
//! The crate is organized as a pipeline:
//! corpus parsing ([`corpus`]) -> dataset construction ([`dataset`]) ->
//! character embedding training ([`embed`]) -> verification evaluation
//! ([`eval`]) and quotation attribution ([`attrib`]).

pub mod attrib;
pub mod corpus;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod eval;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
