//! Annotation service for the human-in-the-loop stages: relation filtering
//! and sentence labeling, with leases, an append-only log and export.

mod api;
mod error;
mod store;
mod tasks;

pub use api::{router, UI_MOUNT};
pub use error::ServiceError;
pub use store::{
    Accepted, Clock, DecisionSubmission, Event, LabelSubmission, ManualClock, Progress,
    StageCounts, Store, SystemClock, VerdictEntry, CORPUS_FILE, DEFAULT_LEASE_SECS, EVENTS_FILE,
};
pub use tasks::{Stage, Task, TaskId, TaskPayload};

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: axum::Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}
