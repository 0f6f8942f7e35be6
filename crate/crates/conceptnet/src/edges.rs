//! Raw ConceptNet response shape and its reduction to ranked relations.

use std::cmp::Ordering;
use std::collections::HashSet;

use kitgi_core::{Concept, Relation, RelationType, MAX_RELATIONS_PER_CONCEPT};
use serde::{Deserialize, Serialize};

use crate::error::KgError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ApiResponse {
    #[serde(default)]
    pub edges: Vec<ApiEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiEdge {
    pub rel: ApiNode,
    pub start: ApiNode,
    pub end: ApiNode,
    #[serde(default)]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiNode {
    #[serde(rename = "@id")]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl ApiNode {
    pub fn new(id: impl Into<String>) -> Self {
        ApiNode {
            id: id.into(),
            language: None,
        }
    }
}

impl ApiEdge {
    pub fn new(start: &str, rel: &str, end: &str, weight: f64) -> Self {
        ApiEdge {
            rel: ApiNode::new(format!("/r/{rel}")),
            start: ApiNode::new(start),
            end: ApiNode::new(end),
            weight,
        }
    }
}

/// Node uri `/c/<lang>/<term>[/<pos>[/...]]` split into language and term.
pub fn parse_node(uri: &str) -> Result<(String, String), KgError> {
    let malformed = || KgError::MalformedUri(uri.to_string());
    let rest = uri.strip_prefix("/c/").ok_or_else(malformed)?;
    let mut parts = rest.split('/');
    let lang = parts
        .next()
        .filter(|l| !l.is_empty())
        .ok_or_else(malformed)?;
    let term = parts
        .next()
        .filter(|t| !t.is_empty())
        .ok_or_else(malformed)?;
    Ok((lang.to_lowercase(), term.to_lowercase()))
}

/// Term of a node uri, lowercased, with part-of-speech and sense segments dropped.
pub fn normalize_term(uri: &str) -> Result<String, KgError> {
    parse_node(uri).map(|(_, term)| term)
}

pub fn relation_label(rel_uri: &str) -> &str {
    rel_uri.strip_prefix("/r/").unwrap_or(rel_uri)
}

struct Candidate {
    rel: RelationType,
    tail: String,
    weight: f64,
}

fn candidate(concept: &Concept, edge: &ApiEdge) -> Option<Candidate> {
    let (start_lang, start) = parse_node(&edge.start.id).ok()?;
    let (end_lang, end) = parse_node(&edge.end.id).ok()?;
    if start_lang != concept.lang() || end_lang != concept.lang() {
        return None;
    }
    if !edge.weight.is_finite() || edge.weight < 0.0 {
        return None;
    }
    let rel = RelationType::parse(relation_label(&edge.rel.id));
    let tail = if start == concept.surface() {
        end
    } else if end == concept.surface() && rel.is_symmetric() {
        start
    } else {
        return None;
    };
    if tail == concept.surface() || Concept::new(tail.clone()).is_err() {
        return None;
    }
    Some(Candidate {
        rel,
        tail,
        weight: edge.weight,
    })
}

/// Reduces raw edges to at most `limit` relations for `concept`: same-language
/// edges only, outgoing edges plus incoming symmetric ones, no self-loops,
/// one relation per (type, tail), ordered by weight descending with ties by
/// (type label, tail), ranked by position.
pub fn select_relations(concept: &Concept, edges: &[ApiEdge], limit: usize) -> Vec<Relation> {
    let mut candidates: Vec<Candidate> =
        edges.iter().filter_map(|e| candidate(concept, e)).collect();
    candidates.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.rel.label().cmp(b.rel.label()))
            .then_with(|| a.tail.cmp(&b.tail))
    });
    let mut seen = HashSet::new();
    candidates
        .into_iter()
        .filter(|c| seen.insert((c.rel.clone(), c.tail.clone())))
        .take(limit.min(MAX_RELATIONS_PER_CONCEPT))
        .enumerate()
        .map(|(rank, c)| Relation::new(concept.clone(), c.rel, c.tail, Some(c.weight), rank as u8))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_terms() {
        assert_eq!(normalize_term("/c/en/see").unwrap(), "see");
        assert_eq!(
            normalize_term("/c/en/wrist_watch/n").unwrap(),
            "wrist_watch"
        );
        assert_eq!(
            normalize_term("/c/en/Paris/n/wn/location").unwrap(),
            "paris"
        );
        for bad in ["/x/", "/c/en", "/c/en/", "/c//see", "c/en/see", ""] {
            assert!(
                matches!(normalize_term(bad), Err(KgError::MalformedUri(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn reduction_rules() {
        let look = Concept::new("look").unwrap();
        let edges = vec![
            ApiEdge::new("/c/en/look", "RelatedTo", "/c/en/see", 5.0),
            ApiEdge::new("/c/en/look", "RelatedTo", "/c/en/see/v", 2.0),
            ApiEdge::new("/c/en/look", "RelatedTo", "/c/fr/regarder", 9.0),
            ApiEdge::new("/c/en/look", "RelatedTo", "/c/en/look", 9.0),
            ApiEdge::new("/c/en/glance", "RelatedTo", "/c/en/look", 4.0),
            ApiEdge::new("/c/en/eye", "UsedFor", "/c/en/look", 8.0),
            ApiEdge::new("/c/en/look", "Synonym", "/c/en/gaze", 4.0),
        ];
        let got: Vec<_> = select_relations(&look, &edges, 5)
            .into_iter()
            .map(|r| (r.rank, r.rel.label().to_string(), r.tail, r.weight))
            .collect();
        assert_eq!(
            got,
            [
                (0, "RelatedTo".into(), "see".into(), Some(5.0)),
                (1, "RelatedTo".into(), "glance".into(), Some(4.0)),
                (2, "Synonym".into(), "gaze".into(), Some(4.0)),
            ]
        );
    }

    #[test]
    fn limit_is_an_upper_bound() {
        let dog = Concept::new("dog").unwrap();
        let edges: Vec<_> = (0..9)
            .map(|i| ApiEdge::new("/c/en/dog", "IsA", &format!("/c/en/t{i}"), f64::from(i)))
            .collect();
        assert_eq!(select_relations(&dog, &edges, 3).len(), 3);
        assert_eq!(select_relations(&dog, &edges, 50).len(), 5);
        assert_eq!(select_relations(&dog, &edges[..2], 5).len(), 2);
    }
}
