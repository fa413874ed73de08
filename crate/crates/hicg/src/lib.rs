//! Session-based recommendation over heterogeneous behavior graphs.
//!
//! The library covers the full pipeline:
//!
//! - [`ingest`] parses clickstream logs into sessions, filters them, splits
//!   train/test by time and expands sessions into next-behavior samples.
//! - [`graph`] builds the per-session heterogeneous item graph and, for
//!   contrastive training, the per-batch union graph with its connected
//!   components and sampled item pairs.
//! - [`model`] holds the neural scorer: item embeddings, gated graph
//!   propagation over typed adjacency, intra-/inter-behavior attention and
//!   full-catalog softmax scoring.
//! - [`train`] runs the multi-task objective (next-item cross-entropy plus a
//!   temperature-scaled contrastive term) with Adam, and checkpoints.
//! - [`eval`] computes HR@K / MRR@K against ranked targets and ships the
//!   S-POP and session-KNN reference rankers.
//! - [`synth`] generates synthetic clickstreams with type-dependent
//!   transition rules, used by the examples and the acceptance suite.
//! - [`run`] wires everything into configurable commands behind the `hicg`
//!   binary.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod autodiff;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod run;
pub mod synth;
pub mod train;

pub use error::{Error, ErrorKind, Result};
