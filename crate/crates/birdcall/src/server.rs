//! HTTP inference endpoint.
//!
//! `POST /classify?source=NAME` takes WAV bytes and answers with report JSON;
//! `GET /healthz` reports the loaded model.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use birdcall_core::pipeline::{Classifier, PipelineConfig};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;

use crate::report::report_json_bytes;

/// Large enough for several minutes of 16-bit stereo at 96 kHz.
pub const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

pub const DEFAULT_SOURCE: &str = "upload";

/// Shared read-only state; nothing here is mutated after startup.
#[derive(Debug)]
pub struct ServiceState {
    pub classifier: Classifier,
    pub model_id: String,
    pub pipeline: PipelineConfig,
}

#[derive(Deserialize)]
struct ClassifyQuery {
    source: Option<String>,
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(status: StatusCode, error: &str, detail: String) -> Response {
    let body = serde_json::to_vec(&json!({ "error": error, "detail": detail })).unwrap_or_default();
    json_response(status, body)
}

async fn classify(
    State(state): State<Arc<ServiceState>>,
    Query(query): Query<ClassifyQuery>,
    body: Bytes,
) -> Response {
    let source = query.source.unwrap_or_else(|| DEFAULT_SOURCE.to_owned());
    let result = tokio::task::spawn_blocking(move || {
        state
            .classifier
            .report_for_wav(&body, &source, &state.model_id, &state.pipeline)
            .map_err(|e| e.to_string())
            .and_then(|report| report_json_bytes(&report).map_err(|e| e.to_string()))
    })
    .await;
    match result {
        Ok(Ok(bytes)) => json_response(StatusCode::OK, bytes),
        Ok(Err(detail)) => error_response(StatusCode::BAD_REQUEST, "malformed-audio", detail),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Response {
    let body = json!({
        "status": "ok",
        "model_id": state.model_id,
        "version": env!("CARGO_PKG_VERSION"),
    });
    json_response(
        StatusCode::OK,
        serde_json::to_vec(&body).unwrap_or_default(),
    )
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/classify", post(classify))
        .route("/healthz", get(healthz))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
