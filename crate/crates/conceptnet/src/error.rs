use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("malformed node uri {0:?}")]
    MalformedUri(String),
    #[error("relation limit must be between 1 and {max}, got {got}")]
    InvalidLimit { got: usize, max: usize },
    #[error("no endpoint configured and no cached or fixture response for {0:?}")]
    NoEndpoint(String),
    #[error("request for {concept:?} failed after {attempts} attempts (last status: {}): {message}", fmt_status(.last_status))]
    Transport {
        concept: String,
        attempts: u32,
        last_status: Option<u16>,
        message: String,
    },
    #[error("undecodable response for {concept:?}: {message}")]
    Decode { concept: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("concept {concept:?}: {source}")]
    ForConcept {
        concept: String,
        #[source]
        source: Box<KgError>,
    },
}

fn fmt_status(status: &Option<u16>) -> String {
    status.map_or_else(|| "none".to_string(), |s| s.to_string())
}

impl KgError {
    /// HTTP status of the last failed attempt, looking through concept annotations.
    pub fn last_status(&self) -> Option<u16> {
        match self {
            KgError::Transport { last_status, .. } => *last_status,
            KgError::ForConcept { source, .. } => source.last_status(),
            _ => None,
        }
    }
}
