//! HTTP routes over a [`SessionManager`].

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::mpsc::RecvTimeoutError;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fakewatch::capture::CaptureError;
use fakewatch::face::FaceError;
use fakewatch::service::{ServiceError, SessionConfig, SessionManager, SessionState};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;

/// Interval between SSE keep-alive comments.
pub const HEARTBEAT: Duration = Duration::from_secs(5);
/// How often an event feed checks for state changes between samples.
const STATE_POLL: Duration = Duration::from_millis(200);

#[derive(Clone)]
pub struct AppState {
    pub manager: Arc<SessionManager>,
    /// Where `POST /sessions/{id}/export` writes. Export is off without it.
    pub export_dir: Option<PathBuf>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

fn status_of(e: &ServiceError) -> (StatusCode, &'static str) {
    match e {
        ServiceError::Config(_) => (StatusCode::BAD_REQUEST, "config"),
        ServiceError::Capture(CaptureError::SourceLost(_)) => (StatusCode::GONE, "source_lost"),
        ServiceError::Capture(CaptureError::Capability(_)) => (StatusCode::NOT_IMPLEMENTED, "capability"),
        ServiceError::Capture(_) => (StatusCode::BAD_REQUEST, "config"),
        ServiceError::Face(FaceError::StaleSelection { .. }) => (StatusCode::CONFLICT, "stale_selection"),
        ServiceError::Face(_) => (StatusCode::INTERNAL_SERVER_ERROR, "face"),
        ServiceError::Scoring(_) => (StatusCode::BAD_REQUEST, "scorer"),
        ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
        ServiceError::UnknownFace(_) => (StatusCode::NOT_FOUND, "unknown_face"),
        ServiceError::RejectedState { .. } => (StatusCode::CONFLICT, "rejected_state"),
        ServiceError::Busy { .. } => (StatusCode::CONFLICT, "busy"),
        ServiceError::PixelWrite(_) => (StatusCode::FORBIDDEN, "pixel_write"),
        ServiceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = status_of(&self.0);
        (status, Json(json!({ "error": self.0.to_string(), "kind": kind }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Run a manager call off the async executor; several of them join threads
/// or decode images.
async fn blocking<R: Send + 'static>(
    state: &AppState,
    f: impl FnOnce(&SessionManager) -> Result<R, ServiceError> + Send + 'static,
) -> ApiResult<R> {
    let manager = Arc::clone(&state.manager);
    tokio::task::spawn_blocking(move || f(&manager)).await.expect("manager call panicked").map_err(ApiError)
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

#[derive(Deserialize)]
struct StartBody {
    target_id: u32,
}

#[derive(Deserialize)]
struct Range {
    from: Option<u64>,
    to: Option<u64>,
}

async fn create(State(st): State<AppState>, Json(config): Json<SessionConfig>) -> ApiResult<impl IntoResponse> {
    let session_id = blocking(&st, move |m| m.create_session(config)).await?;
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

async fn list(State(st): State<AppState>) -> Json<Vec<String>> {
    Json(st.manager.session_ids())
}

async fn info(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(&st, move |m| m.info(&id)).await?))
}

async fn remove(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(&st, move |m| m.remove(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn detect(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let faces = blocking(&st, move |m| m.detect(&id)).await?;
    Ok(Json(json!({ "faces": faces })))
}

async fn thumbnail(State(st): State<AppState>, Path((id, face)): Path<(String, u32)>) -> ApiResult<impl IntoResponse> {
    let png = blocking(&st, move |m| m.thumbnail(&id, face)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn start(State(st): State<AppState>, Path(id): Path<String>, Json(body): Json<StartBody>) -> ApiResult<StatusCode> {
    blocking(&st, move |m| m.start_monitoring(&id, body.target_id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn stop(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(&st, move |m| m.stop(&id)).await?))
}

async fn timeline(State(st): State<AppState>, Path(id): Path<String>, Query(r): Query<Range>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(&st, move |m| m.timeline(&id, r.from, r.to)).await?))
}

async fn summary(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(&st, move |m| m.summary(&id)).await?))
}

async fn audit(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(&st, move |m| m.audit(&id)).await?))
}

async fn export(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let Some(dir) = st.export_dir.clone() else {
        return Err(ServiceError::Config("summary export is disabled; start the server with --export-dir".into()).into());
    };
    let path = blocking(&st, move |m| m.export_summary(&id, &dir)).await?;
    Ok(Json(json!({ "path": path })))
}

/// Server-sent events: every existing sample, then each new one as it is
/// appended (`sample`), plus `state` whenever the session state changes.
/// The feed ends once the session is stopped.
async fn events(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let (backlog, rx) = {
        let id = id.clone();
        blocking(&st, move |m| m.subscribe(&id)).await?
    };
    let (tx, out) = mpsc::channel::<Event>(64);
    let manager = Arc::clone(&st.manager);
    tokio::task::spawn_blocking(move || {
        let send = |e: Event| tx.blocking_send(e).is_ok();
        let state_event = |s: SessionState| Event::default().event("state").json_data(json!({ "state": s })).expect("serializable");
        let sample_event = |s| Event::default().event("sample").json_data(s).expect("serializable");

        let mut last = None;
        for s in backlog {
            if !send(sample_event(s)) {
                return;
            }
        }
        loop {
            match rx.recv_timeout(STATE_POLL) {
                Ok(s) => {
                    if !send(sample_event(s)) {
                        return;
                    }
                    continue;
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return,
            }
            let Ok(state) = manager.state(&id) else { return };
            if last != Some(state) {
                last = Some(state);
                if !send(state_event(state)) {
                    return;
                }
            }
            if state == SessionState::Stopped {
                // samples appended just before the stop
                while let Ok(s) = rx.try_recv() {
                    if !send(sample_event(s)) {
                        return;
                    }
                }
                return;
            }
        }
    });
    let stream = futures::stream::unfold(out, |mut out| async move { out.recv().await.map(|e| (Ok(e), out)) });
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(HEARTBEAT)))
}

async fn no_store(mut res: Response) -> Response {
    res.headers_mut().insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    res
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(info).delete(remove))
        .route("/sessions/{id}/detect", post(detect))
        .route("/sessions/{id}/faces/{face}/thumbnail", get(thumbnail))
        .route("/sessions/{id}/start", post(start))
        .route("/sessions/{id}/stop", post(stop))
        .route("/sessions/{id}/timeline", get(timeline))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/audit", get(audit))
        .route("/sessions/{id}/export", post(export))
        .layer(axum::middleware::map_response(no_store))
        .with_state(state)
}
