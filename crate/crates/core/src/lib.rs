//! Spidroin repeat language models.
//!
//! A small decoder-only transformer is distilled from a larger teacher,
//! adapted to MaSp repeat regions with LoRA, and then taught to map between
//! repeat sequences and normalized mechanical-property vectors in both
//! directions. The [`evalsuite`] module holds the sequence, structure and
//! property analyses used to check the results.

pub mod autograd;
pub mod error;
pub mod evalsuite;
pub mod model;
pub mod seqdata;
pub mod synthetic;
pub mod tokenizer;
pub mod train;

pub use error::{Error, ErrorKind, Result};
