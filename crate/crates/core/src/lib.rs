//! Multi-step gender rewriting for gender-marking, morphologically rich
//! languages.
//!
//! Given a sentence and a target user gender context (speaker and listener),
//! the pipeline identifies a per-word gender label, rewrites the incompatible
//! words out of context through a backoff cascade of rewriters
//! (corpus lookup, morphological rules, neural transduction), then ranks the
//! resulting sentence candidates in context with a pseudo-log-likelihood
//! scorer. An evaluation harness provides MaxMatch precision/recall/F₀.₅,
//! BLEU and per-stage error attribution.
//!
//! The crate is data-parallel over sentences and candidates via rayon when
//! the `parallel` feature (default) is enabled; disabling it yields a fully
//! sequential build with identical outputs.

pub mod corpus;
pub mod error;
mod exec;
pub mod eval;
#[doc(hidden)]
pub mod fixtures;
pub mod gid;
pub mod labels;
mod model_io;
pub mod pipeline;
pub mod rewrite;
pub mod select;

pub use error::{Error, Result};
pub use labels::{needs_rewrite, required_word_target, SentenceTarget, WordLabel};
