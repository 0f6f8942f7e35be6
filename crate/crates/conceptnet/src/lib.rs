//! ConceptNet retrieval: top-k relations per concept, cached on disk, with an
//! offline fixture mode.

mod client;
mod edges;
mod error;

pub use client::{
    fixture_path, ClientConfig, ConceptNetClient, KgQueryResult, KgSource, BASE_URL_ENV,
};
pub use edges::{
    normalize_term, parse_node, relation_label, select_relations, ApiEdge, ApiNode, ApiResponse,
};
pub use error::KgError;
