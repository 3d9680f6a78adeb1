//! HTTP routes over a [`SessionManager`]. Model calls block, so every
//! handler runs on the blocking pool.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::{ServiceError, SessionManager};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

type Reply = Result<(StatusCode, Json<Value>), ServiceError>;

async fn blocking<F>(f: F) -> Reply
where
    F: FnOnce() -> Result<(StatusCode, Value), ServiceError> + Send + 'static,
{
    let (status, body) = tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok((status, Json(body)))
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ServiceError::Validation(e.body_text()))
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("response serializes")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    prompt: String,
    num_samples: Option<usize>,
    backend: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BrushRequest {
    sentence_index: usize,
    start: usize,
    end: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfirmRequest {
    token: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    new_text: String,
}

#[derive(Deserialize)]
struct EvidenceQuery {
    target: Option<String>,
}

type Shared = State<Arc<SessionManager>>;

async fn create(State(m): Shared, payload: Result<Json<CreateRequest>, JsonRejection>) -> Reply {
    let req = body(payload)?;
    blocking(move || {
        let s = m.create_session(&req.prompt, req.num_samples, req.backend.as_deref())?;
        Ok((
            StatusCode::CREATED,
            json!({ "session_id": s.session_id, "state": to_value(&*s) }),
        ))
    })
    .await
}

async fn read(State(m): Shared, Path(id): Path<String>) -> Reply {
    blocking(move || {
        Ok((
            StatusCode::OK,
            json!({ "state": to_value(&*m.get_session(&id)?) }),
        ))
    })
    .await
}

async fn brush(
    State(m): Shared,
    Path(id): Path<String>,
    payload: Result<Json<BrushRequest>, JsonRejection>,
) -> Reply {
    let req = body(payload)?;
    blocking(move || {
        let s = m.brush(&id, req.sentence_index, req.start, req.end)?;
        Ok((StatusCode::OK, to_value(&s)))
    })
    .await
}

async fn confirm(
    State(m): Shared,
    Path(id): Path<String>,
    payload: Result<Json<ConfirmRequest>, JsonRejection>,
) -> Reply {
    let req = body(payload)?;
    blocking(move || {
        let a = m.confirm_brush(&id, &req.token)?;
        Ok((StatusCode::OK, json!({ "annotation": to_value(&a) })))
    })
    .await
}

async fn edit(
    State(m): Shared,
    Path(id): Path<String>,
    payload: Result<Json<EditRequest>, JsonRejection>,
) -> Reply {
    let req = body(payload)?;
    blocking(move || {
        let s = m.apply_edit(&id, &req.new_text)?;
        Ok((StatusCode::OK, json!({ "state": to_value(&*s) })))
    })
    .await
}

async fn list_evidence(
    State(m): Shared,
    Path(id): Path<String>,
    Query(q): Query<EvidenceQuery>,
) -> Reply {
    let target = q
        .target
        .ok_or_else(|| ServiceError::Validation("missing query parameter 'target'".into()))?;
    blocking(move || {
        let e = m.list_evidence(&id, &target)?;
        Ok((StatusCode::OK, json!({ "evidence": to_value(&e) })))
    })
    .await
}

async fn sentence_claims(
    State(m): Shared,
    path: Result<Path<(String, usize)>, PathRejection>,
) -> Reply {
    let Path((id, index)) = path.map_err(|e| ServiceError::Validation(e.body_text()))?;
    blocking(move || {
        let c = m.sentence_claims(&id, index)?;
        Ok((StatusCode::OK, json!({ "claims": to_value(&c) })))
    })
    .await
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn fallback() -> ServiceError {
    ServiceError::NotFound {
        kind: "route",
        id: String::new(),
    }
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}", get(read))
        .route("/api/sessions/{id}/brush", post(brush))
        .route("/api/sessions/{id}/brush/confirm", post(confirm))
        .route("/api/sessions/{id}/edit", post(edit))
        .route("/api/sessions/{id}/evidence", get(list_evidence))
        .route(
            "/api/sessions/{id}/sentences/{index}/claims",
            get(sentence_claims),
        )
        .fallback(fallback)
        .with_state(manager)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    manager: Arc<SessionManager>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(manager))
        .with_graceful_shutdown(shutdown)
        .await
}
