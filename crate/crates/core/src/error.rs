use std::path::PathBuf;

use thiserror::Error;

use crate::model::{GenerationCondition, RelationId};
use crate::validate::Violation;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid concept {surface:?}: {reason}")]
    InvalidConcept {
        surface: String,
        reason: &'static str,
    },
    #[error("concept set has {0} concepts, expected 3 to 5")]
    ConceptSetSize(usize),
    #[error("duplicate concept {0:?}")]
    DuplicateConcept(String),
    #[error("unknown generation condition {0:?}")]
    UnknownCondition(String),
    #[error("unknown failure variant {0:?}")]
    UnknownFailureVariant(String),
    #[error("invalid timestamp {0}")]
    InvalidTimestamp(String),
    #[error("record has no {0} sentence")]
    MissingSentence(GenerationCondition),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse failure: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: record {record_id} is invalid: {}", join_violations(.violations))]
    Invalid {
        line: usize,
        record_id: String,
        violations: Vec<Violation>,
    },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("bundle concept {0:?} is not part of the concept set")]
    ForeignConcept(String),
    #[error("malformed knowledge text near {0:?}")]
    MalformedKnowledgeText(String),
    #[error("relation rank {0} out of range")]
    RankOutOfRange(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
}

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("decision references unknown relation {0}")]
    UnknownRelation(RelationId),
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{condition} annotation missing for records: {}", .record_ids.join(", "))]
    MissingAnnotation {
        condition: GenerationCondition,
        record_ids: Vec<String>,
    },
    #[error(transparent)]
    Ablation(#[from] AblationError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
