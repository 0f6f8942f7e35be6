use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::store::{DecisionSubmission, LabelSubmission, Store};
use crate::tasks::Stage;

/// Mount point of the static annotator UI.
pub const UI_MOUNT: &str = "/ui";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::UnknownTask(_) | ServiceError::UnknownRecord(_) => StatusCode::NOT_FOUND,
            ServiceError::UnknownStage(_)
            | ServiceError::EmptyAnnotator
            | ServiceError::WrongStage(_) => StatusCode::BAD_REQUEST,
            ServiceError::Undecided(_)
            | ServiceError::UnknownRelation(_)
            | ServiceError::InvalidLabel(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotLeased(_)
            | ServiceError::LeaseExpired(_)
            | ServiceError::NotLeaseHolder { .. }
            | ServiceError::AlreadyCompleted(_)
            | ServiceError::NotOpen(_) => StatusCode::CONFLICT,
            ServiceError::Io { .. }
            | ServiceError::CorruptLog { .. }
            | ServiceError::Dataset(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ServiceError::Undecided(ids) | ServiceError::UnknownRelation(ids) = &self {
            body["relation_ids"] = json!(ids);
        }
        (status, Json(body)).into_response()
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .expect("store task panicked")
}

async fn next_task(
    State(store): State<Arc<Store>>,
    Query(q): Query<HashMap<String, String>>,
) -> Response {
    let result = async {
        let stage: Stage = q.get("stage").map(String::as_str).unwrap_or("").parse()?;
        let annotator = q.get("annotator").cloned().unwrap_or_default();
        blocking(move || store.lease_task(&annotator, stage)).await
    }
    .await;
    match result {
        Ok(Some(task)) => Json(task).into_response(),
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => e.into_response(),
    }
}

async fn decisions(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Json(body): Json<DecisionSubmission>,
) -> Result<Response, ServiceError> {
    let accepted = blocking(move || store.submit_filter_decisions(&id, body)).await?;
    Ok(Json(accepted).into_response())
}

async fn label(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Json(body): Json<LabelSubmission>,
) -> Result<Response, ServiceError> {
    let accepted = blocking(move || store.submit_label(&id, body)).await?;
    Ok(Json(accepted).into_response())
}

async fn progress(State(store): State<Arc<Store>>) -> Response {
    Json(store.progress()).into_response()
}

async fn export(State(store): State<Arc<Store>>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        store.export(),
    )
        .into_response()
}

async fn record(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Response, ServiceError> {
    Ok(Json(store.record(&id)?).into_response())
}

/// API routes, plus the UI bundle under [`UI_MOUNT`] when a directory is given.
pub fn router(store: Arc<Store>, ui_dir: Option<PathBuf>) -> Router {
    let mut app = Router::new()
        .route("/tasks/next", get(next_task))
        .route("/tasks/{id}/decisions", post(decisions))
        .route("/tasks/{id}/label", post(label))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .route("/records/{id}", get(record))
        .with_state(store);
    if let Some(dir) = ui_dir {
        app = app
            .nest_service(
                UI_MOUNT,
                ServeDir::new(dir).append_index_html_on_directories(true),
            )
            .route("/", get(|| async { Redirect::temporary("/ui/") }));
    }
    app
}
