//! Sentence generation behind a uniform backend interface.

mod backend;
mod batch;
mod error;

pub use backend::{DecodeParams, Generator, HttpBackend, StubBackend, SubprocessBackend};
pub use batch::{
    first_line, generate, generate_batch, prompt_for, BatchFailure, BatchItem, BatchOutcome,
    GenerationSettings,
};
pub use error::GenError;
