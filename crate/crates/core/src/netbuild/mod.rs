//! Knowledge network assembly.
//!
//! Nodes are abstracts and keywords. Edges carry distances (smaller is
//! closer) in three classes:
//!
//! * abstract-abstract, from centroid k-nearest neighbours, scaled to `[0, 1]`;
//! * keyword-keyword, from typed ontology relations, scaled by `sigma`;
//! * abstract-keyword, inverse tf-idf from synonym tagging, scaled to `[0, sigma]`.

mod keywords;
mod knn;
mod network;
mod node;
mod tfidf;
mod trie;

pub use keywords::{load_keyword_graph, KeywordCatalog, Relation, RelationType, RelationWeights};
pub use knn::{knn_abstract_edges, knn_lists, KnnMethod};
pub use network::{
    assemble, read_network, write_network, Adjacent, ConnectivityReport, KnowledgeNetwork, NetworkStats,
};
pub use node::{Edge, EdgeClass, NodeId, NodeKind};
pub use tfidf::{raw_ak_weights, tfidf_edges, RawAkWeight};
pub use trie::{build_synonym_trie, tag_abstracts, CountMatrix, SynonymTrie, TagMode, TrieReport};

/// Default keyword-layer scale factor.
pub const DEFAULT_SIGMA: f64 = 2.0;

/// Default neighbours per abstract.
pub const DEFAULT_K: usize = 10;
