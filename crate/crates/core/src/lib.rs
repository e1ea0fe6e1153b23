//! Automated weak supervision for query/candidate ranking.
//!
//! The pipeline pretrains a bank of unsupervised rankers over a corpus of
//! queries and candidates, turns a selected subset of their scores into
//! top-k pseudo labels, trains neural rankers on those labels and lets a
//! three-step LSTM policy, updated with REINFORCE, pick which rankers and
//! which `k` to combine.
//!
//! Module map:
//!
//! - [`corpus`], [`graph`], [`synth`]: documents, vocabulary, the
//!   query-word-candidate graph and a planted-topic corpus generator.
//! - [`unsup`]: BM25, skip-gram text embeddings and graph embeddings
//!   (random walks, biased walks, first/second-order proximity, neighbour
//!   aggregation), each emitting a [`unsup::ScoreMatrix`].
//! - [`pseudo`]: score aggregation, top-k labelling and training triples.
//! - [`nn`]: the small differentiable kernel (dense, cosine, RBF kernel
//!   pooling, LSTM cell, optimizers, finite-difference checks, checkpoints).
//! - [`sup`]: representation, interaction and graph-aggregation rankers.
//! - [`controller`]: the sampling policy and its REINFORCE update.
//! - [`trainer`]: pretraining, episodes, joint training and ablations.
//! - [`eval`]: the 1-positive + 99-negatives protocol and HR/NDCG/MRR.
//! - [`config`], [`experiment`]: key=value experiment configuration and the
//!   run-directory workflow used by the command-line tool.

mod binio;
pub mod config;
pub mod controller;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod hashing;
pub mod nn;
pub mod pseudo;
pub mod sage;
pub mod synth;
pub mod sup;
pub mod trainer;
pub mod unsup;

pub use error::{Error, Result};

/// Version string written into every persisted artifact.
pub const FORMAT_VERSION: u32 = 1;
