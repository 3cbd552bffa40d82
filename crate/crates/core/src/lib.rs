//! Answer candidate type selection for knowledge-graph question answering.
//!
//! Candidate answer labels from any text-to-text model are linked to KG
//! entities, the expected answer type is inferred from the candidates'
//! `instance_of` types, the pool is widened with forward one-hop neighbors
//! of the question entities, and every candidate is ranked by a weighted
//! sum of type, neighbour, model-rank and question/property scores.

pub mod candidates_io;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod kg_store;
pub mod linking;
pub mod pipeline;
#[cfg(feature = "remote")]
pub mod remote;
pub mod scoring;
pub mod typing;

pub use error::{Error, Result};
