//! Layered knowledge networks for literature-based hypothesis generation.
//!
//! The pipeline turns a corpus of abstracts plus a keyword ontology into a
//! weighted undirected network with two layers (abstracts and keywords),
//! answers shortest-path queries between keywords, widens each path into a
//! cloud of nearby abstracts, and fits an LDA topic model to that cloud.
//!
//! Stages, in order:
//!
//! * [`corpus`]: ingest JSON-lines abstracts, normalize text, filter by date.
//! * [`phrases`]: mine frequent multi-word phrases and merge them into tokens.
//! * [`embed`]: skip-gram embeddings and per-document centroids.
//! * [`netbuild`]: kNN abstract edges, keyword relations, synonym tagging,
//!   inverse tf-idf abstract-keyword edges, network assembly and I/O.
//! * [`query`]: Dijkstra shortest paths and abstract-cloud extension.
//! * [`topics`]: collapsed Gibbs LDA and term-distribution reports.
//! * [`pipeline`]: config-driven build with content-hashed stage caching.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod netbuild;
pub mod phrases;
pub mod pipeline;
pub mod query;
pub mod topics;

mod util;

pub use error::{Error, Result};
