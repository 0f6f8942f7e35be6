use std::path::PathBuf;

use kitgi_core::{DatasetError, RelationId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("unknown stage {0:?}; expected FilterRelations or LabelSentence")]
    UnknownStage(String),
    #[error("annotator id must not be empty")]
    EmptyAnnotator,
    #[error("task {0} belongs to another stage")]
    WrongStage(String),
    #[error("undecided relations: {}", join(.0))]
    Undecided(Vec<RelationId>),
    #[error("relations not in the task: {}", join(.0))]
    UnknownRelation(Vec<RelationId>),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("task {0} is not leased")]
    NotLeased(String),
    #[error("lease on task {0} expired")]
    LeaseExpired(String),
    #[error("task {task} is leased to {holder}")]
    NotLeaseHolder { task: String, holder: String },
    #[error("task {0} is already completed with a different submission")]
    AlreadyCompleted(String),
    #[error("task {0} is not open yet")]
    NotOpen(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("event log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

fn join(ids: &[RelationId]) -> String {
    ids.iter()
        .map(RelationId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

impl ServiceError {
    /// Stable machine-readable code for API responses.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownTask(_) => "UnknownTask",
            ServiceError::UnknownRecord(_) => "UnknownRecord",
            ServiceError::UnknownStage(_) => "UnknownStage",
            ServiceError::EmptyAnnotator => "EmptyAnnotator",
            ServiceError::WrongStage(_) => "WrongStage",
            ServiceError::Undecided(_) => "Undecided",
            ServiceError::UnknownRelation(_) => "UnknownRelation",
            ServiceError::InvalidLabel(_) => "InvalidLabel",
            ServiceError::NotLeased(_) => "NotLeased",
            ServiceError::LeaseExpired(_) => "LeaseExpired",
            ServiceError::NotLeaseHolder { .. } => "NotLeaseHolder",
            ServiceError::AlreadyCompleted(_) => "AlreadyCompleted",
            ServiceError::NotOpen(_) => "NotOpen",
            ServiceError::Io { .. } => "Io",
            ServiceError::CorruptLog { .. } => "CorruptLog",
            ServiceError::Dataset(_) => "Dataset",
        }
    }
}
