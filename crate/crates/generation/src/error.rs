use kitgi_core::PromptError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("backend timed out")]
    Timeout,
    #[error("transport failure (status {}): {message}", .status.map_or_else(|| "none".to_string(), |s| s.to_string()))]
    Transport {
        status: Option<u16>,
        message: String,
    },
    #[error("undecodable completion: {0}")]
    Decode(String),
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("backend failed (exit {}): {}", .exit_code.map_or_else(|| "none".to_string(), |c| c.to_string()), .output.trim())]
    BackendFailed {
        exit_code: Option<i32>,
        output: String,
    },
    #[error("record has no knowledge bundle for this condition")]
    MissingKnowledge,
    #[error(transparent)]
    Prompt(#[from] PromptError),
}
