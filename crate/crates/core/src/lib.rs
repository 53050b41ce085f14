//! Core algorithms for task-routed speculative decoding.
//!
//! This crate is `no_std` and only needs `alloc`. Everything that touches
//! files, clocks or the command line lives in the `specroute` companion
//! crate; here we keep the pieces that are pure functions of their inputs
//! and a seed:
//!
//! * [`vocab`], [`prob`], [`ngram`]: the language-model substrate used for
//!   target, base draft and adapted drafts.
//! * [`engine`]: draft/verify speculative decoding with greedy and
//!   stochastic (rejection-sampling) verification.
//! * [`perf`]: the closed-form speedup model and its Monte Carlo check.
//! * [`partition`]: preprocessing, hashed TF-IDF, random projection and
//!   k-means task partitioning.
//! * [`forge`]: per-task draft adaptation.
//! * [`router`]: the lightweight prompt classifier and routing.
//! * [`synth`]: synthetic multi-domain corpora and dataset collection.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod engine;
pub mod error;
pub mod forge;
pub mod hash;
pub mod model;
pub mod ngram;
pub mod partition;
pub mod perf;
pub mod prob;
pub mod router;
pub mod synth;
pub mod vocab;

pub use error::{Error, Result};
pub use model::LanguageModel;
pub use ngram::NgramModel;
pub use prob::ProbVector;
pub use vocab::{TokenId, Vocab, BOS, EOS, UNK};
