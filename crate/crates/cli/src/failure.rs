use std::path::Path;

use kitgi_conceptnet::KgError;
use kitgi_core::{DatasetError, PromptError, StatsError};
use kitgi_generation::GenError;
use kitgi_service::ServiceError;
use thiserror::Error;

/// Command failure, split by exit status.
#[derive(Debug, Error)]
pub enum Failure {
    /// Bad flags, bad input data, or a pipeline step run out of order.
    #[error("{0}")]
    User(String),
    /// Backend, network or filesystem trouble.
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Failure {
        Failure::Runtime(format!("{}: {err}", path.display()))
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}

impl From<PromptError> for Failure {
    fn from(e: PromptError) -> Self {
        Failure::User(e.to_string())
    }
}

impl From<KgError> for Failure {
    fn from(e: KgError) -> Self {
        let mut root = &e;
        while let KgError::ForConcept { source, .. } = root {
            root = source;
        }
        match root {
            KgError::MalformedUri(_) | KgError::InvalidLimit { .. } | KgError::NoEndpoint(_) => {
                Failure::User(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Prompt(_) | GenError::MissingKnowledge => Failure::User(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::User(e.to_string()),
        }
    }
}
