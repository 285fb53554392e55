//! JSON API under `/api/v1`. Every mutation maps onto one session step.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use delf_core::executor::ExecutorError;
use delf_core::gateway::GatewayError;
use delf_core::replay::ScriptStep;
use delf_core::schema::DesignPair;
use delf_core::session::{Event, SessionError, SessionState};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::app::App;

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status: status.as_u16(), code: code.into(), message: message.into() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        let (status, code) = match &e {
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::WrongPhase { .. } => (StatusCode::CONFLICT, "wrong_phase"),
            SessionError::Empty(_) | SessionError::Design(_) | SessionError::Executor(ExecutorError::Design(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request")
            }
            SessionError::Gateway(GatewayError::MissingCredential | GatewayError::InvalidConfig(_)) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "backend_config")
            }
            SessionError::Gateway(_) => (StatusCode::BAD_GATEWAY, "gateway_failure"),
            SessionError::Executor(ExecutorError::Config(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "executor_config"),
            SessionError::Executor(_) => (StatusCode::BAD_GATEWAY, "harness_failure"),
            SessionError::Prompt(_) => (StatusCode::INTERNAL_SERVER_ERROR, "template"),
            SessionError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        Self::new(status, code, message)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBody {
    #[serde(default = "default_name")]
    pub name: String,
    pub description: String,
}

fn default_name() -> String {
    "environment".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackBody {
    pub text: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproveBody {
    #[serde(default)]
    pub edited: Option<DesignPair>,
}

#[derive(Debug, Deserialize)]
pub struct Cursor {
    #[serde(default)]
    pub cursor: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventPage {
    pub events: Vec<Event>,
    pub next_cursor: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CodePage {
    pub version: usize,
    pub language_tag: String,
    pub source: String,
    pub query: String,
}

/// Runs blocking session work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, SessionError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn perform(app: Arc<App>, id: String, step: ScriptStep) -> ApiResult<Json<SessionState>> {
    blocking(move || app.perform(&id, &step)).await.map(Json)
}

async fn create(
    State(app): State<Arc<App>>,
    body: Result<Json<CreateBody>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionState>)> {
    let Json(body) = body?;
    let state = blocking(move || app.create(&body.name, &body.description, None)).await?;
    Ok((StatusCode::CREATED, Json(state)))
}

async fn list(State(app): State<Arc<App>>) -> ApiResult<Response> {
    let entries = blocking(move || app.store.list()).await?;
    Ok(Json(entries).into_response())
}

async fn show(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    blocking(move || app.store.load(&id)).await.map(Json)
}

async fn design(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    perform(app, id, ScriptStep::Propose).await
}

async fn feedback(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Result<Json<FeedbackBody>, JsonRejection>,
) -> ApiResult<Json<SessionState>> {
    let Json(body) = body?;
    perform(app, id, ScriptStep::Feedback { text: body.text }).await
}

async fn approve(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Option<Json<ApproveBody>>,
) -> ApiResult<Json<SessionState>> {
    let edited = body.and_then(|Json(b)| b.edited);
    perform(app, id, ScriptStep::Approve { edited }).await
}

async fn codify(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    perform(app, id, ScriptStep::Codify).await
}

async fn validate(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    perform(app, id, ScriptStep::Validate).await
}

async fn abandon(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    perform(app, id, ScriptStep::Abandon).await
}

async fn code(
    State(app): State<Arc<App>>,
    Path((id, version)): Path<(String, usize)>,
) -> ApiResult<Json<CodePage>> {
    let state = blocking(move || app.store.load(&id)).await?;
    let entry = version
        .checked_sub(1)
        .and_then(|i| state.code_versions.get(i))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no code version {version}")))?;
    Ok(Json(CodePage {
        version,
        language_tag: entry.candidate.language_tag.clone(),
        source: entry.candidate.source.clone(),
        query: entry.query.to_string(),
    }))
}

async fn metrics(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Response> {
    let m = blocking(move || app.store.load(&id)?.finalize_metrics()).await?;
    Ok(Json(m).into_response())
}

async fn events(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(cursor): Query<Cursor>,
) -> ApiResult<Json<EventPage>> {
    let state = blocking(move || app.store.load(&id)).await?;
    Ok(Json(EventPage { events: state.events_since(cursor.cursor).to_vec(), next_cursor: state.next_cursor() }))
}

async fn unknown_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(app: Arc<App>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/design", post(design))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/approve", post(approve))
        .route("/sessions/{id}/codify", post(codify))
        .route("/sessions/{id}/validate", post(validate))
        .route("/sessions/{id}/abandon", post(abandon))
        .route("/sessions/{id}/code/{version}", get(code))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/events", get(events))
        .fallback(unknown_route);
    let ui = app.config.ui_dir.clone();
    let router = Router::new().nest("/api/v1", api).with_state(app);
    match ui {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    }
}

pub async fn serve(app: Arc<App>, bind: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
