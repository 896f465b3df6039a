//! HTTP routes over the session hub.

use std::convert::Infallible;
use std::collections::VecDeque;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::{json, Value};
use symwrap::orchestrator::{Event, Mode, Revision, SessionError, StopTime};
use symwrap::tools::registry;
use symwrap::world::derive_scene_graph;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::broadcast::error::RecvError;

use crate::config::GatewayConfig;
use crate::hub::{ApiEvent, Handle, Hub};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": error, "message": message.into() }),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", format!("no session {id}"))
    }

    fn closing() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "shutting-down", "server is shutting down")
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::WrongPhase { .. } | SessionError::PlanInvalid { .. } | SessionError::Stale => {
                StatusCode::CONFLICT
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let mut body = serde_json::to_value(&e).unwrap_or_else(|_| json!({}));
        body["message"] = json!(e.to_string());
        Self { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<Hub>>;

fn handle(hub: &Hub, id: &str) -> ApiResult<Arc<Handle>> {
    hub.get(id).ok_or_else(|| ApiError::not_found(id))
}

/// Runs a session operation off the async workers; translation may block
/// on a remote model.
async fn op<R: Send + 'static>(
    hub: Arc<Hub>,
    id: String,
    f: impl FnOnce(&mut symwrap::orchestrator::Session) -> R + Send + 'static,
) -> ApiResult<R> {
    if hub.is_closing() {
        return Err(ApiError::closing());
    }
    let h = handle(&hub, &id)?;
    tokio::task::spawn_blocking(move || hub.with(&h, f))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

fn record(hub: &Hub, id: &str) -> ApiResult<Value> {
    let h = handle(hub, id)?;
    Ok(hub.with(&h, |s| serde_json::to_value(s.record()).expect("record serializes")))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn tools() -> Json<Value> {
    Json(serde_json::to_value(registry()).expect("registry serializes"))
}

async fn scene(State(hub): Shared) -> ApiResult<Json<Value>> {
    let bad = |m: String| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "scene", m);
    let spec = hub.config.scene_spec().map_err(bad)?;
    let world = hub.config.world().map_err(bad)?;
    Ok(Json(json!({
        "scene": spec,
        "abstraction": world.abstraction().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "graph": derive_scene_graph(&world, symwrap::world::DEFAULT_TOLERANCE),
    })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    mode: String,
    #[serde(default)]
    translator: Option<String>,
    #[serde(default)]
    auto_approve: bool,
}

async fn create(State(hub): Shared, Json(req): Json<CreateSession>) -> ApiResult<(StatusCode, Json<Value>)> {
    let invalid = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-request", m);
    let mode: Mode = req.mode.parse().map_err(invalid)?;
    let translator = hub.config.translator_kind(req.translator.as_deref()).map_err(invalid)?;
    let h = hub
        .create(mode, translator, req.auto_approve)
        .map_err(|m| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "unavailable", m))?;
    Ok((StatusCode::CREATED, Json(json!({ "id": h.id, "mode": mode }))))
}

async fn list(State(hub): Shared) -> Json<Value> {
    let sessions: Vec<Value> = hub
        .ids()
        .into_iter()
        .filter_map(|id| {
            let h = hub.get(&id)?;
            Some(hub.with(&h, |s| json!({ "id": id, "phase": s.phase(), "instruction": s.instruction() })))
        })
        .collect();
    Json(json!(sessions))
}

async fn show(State(hub): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    record(&hub, &id).map(Json)
}

#[derive(Debug, Deserialize)]
struct TranscriptLine {
    line: String,
}

async fn transcript(State(hub): Shared, Path(id): Path<String>, Json(req): Json<TranscriptLine>) -> ApiResult<Json<Value>> {
    let (gate, phase) = op(hub, id, move |s| {
        let gate = s.transcript(&req.line);
        (gate, s.phase().clone())
    })
    .await?;
    Ok(Json(json!({ "gate": gate, "phase": phase })))
}

async fn approve(State(hub): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    op(hub.clone(), id.clone(), |s| s.approve()).await??;
    record(&hub, &id).map(Json)
}

#[derive(Debug, Deserialize)]
struct ReviseRequest {
    revision: Revision,
}

async fn revise(State(hub): Shared, Path(id): Path<String>, Json(req): Json<ReviseRequest>) -> ApiResult<Json<Value>> {
    op(hub.clone(), id.clone(), move |s| s.revise(req.revision)).await??;
    record(&hub, &id).map(Json)
}

async fn stop(State(hub): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let at = StopTime::Wall(std::time::Instant::now());
    // stops are honored during shutdown too
    let h = handle(&hub, &id)?;
    let phase = tokio::task::spawn_blocking(move || {
        hub.with(&h, |s| {
            s.request_stop(at);
            s.phase().clone()
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(Json(json!({ "phase": phase })))
}

async fn resume(State(hub): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let phase = op(hub, id, |s| {
        s.resume();
        s.phase().clone()
    })
    .await?;
    Ok(Json(json!({ "phase": phase })))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    after: Option<u64>,
}

/// Replays the timeline after the client's last-seen sequence number, then
/// follows live events. Sequence numbers are used to drop duplicates, and a
/// lagging subscriber is refilled from the timeline, so nothing is skipped.
fn event_stream(hub: Arc<Hub>, h: Arc<Handle>, next: u64) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    struct St {
        h: Arc<Handle>,
        rx: tokio::sync::broadcast::Receiver<Event>,
        closing: tokio::sync::watch::Receiver<bool>,
        next: u64,
        queue: VecDeque<Event>,
    }
    let rx = h.subscribe();
    let queue = h.events_from(next).into();
    let st = St {
        closing: hub.closing(),
        h,
        rx,
        next,
        queue,
    };
    stream::unfold(st, |mut st| async move {
        loop {
            if let Some(e) = st.queue.pop_front() {
                if e.seq < st.next {
                    continue;
                }
                st.next = e.seq + 1;
                let api = ApiEvent {
                    session: st.h.id.clone(),
                    event: e,
                };
                let data = serde_json::to_string(&api).expect("event serializes");
                let sse = SseEvent::default().id(api.event.seq.to_string()).data(data);
                return Some((Ok(sse), st));
            }
            if *st.closing.borrow() {
                return None;
            }
            tokio::select! {
                r = st.rx.recv() => match r {
                    Ok(e) => st.queue.push_back(e),
                    Err(RecvError::Lagged(_)) => st.queue.extend(st.h.events_from(st.next)),
                    Err(RecvError::Closed) => return None,
                },
                _ = st.closing.changed() => {}
            }
        }
    })
}

async fn events(
    State(hub): Shared,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let h = handle(&hub, &id)?;
    let last_seen = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .or(q.after);
    let next = last_seen.map_or(0, |s| s + 1);
    Ok(Sse::new(event_stream(hub, h, next)).keep_alive(KeepAlive::default()))
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tools", get(tools))
        .route("/world/scene", get(scene))
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/transcript", post(transcript))
        .route("/sessions/{id}/approve", post(approve))
        .route("/sessions/{id}/revise", post(revise))
        .route("/sessions/{id}/stop", post(stop))
        .route("/sessions/{id}/resume", post(resume))
        .route("/sessions/{id}/events", get(events))
        .with_state(hub)
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    hub: Arc<Hub>,
}

impl Server {
    pub async fn bind(config: GatewayConfig) -> Result<Self, ServeError> {
        let addr = format!("{}:{}", config.bind, config.port);
        let listener = TcpListener::bind(&addr).await.map_err(|source| ServeError::Bind { addr, source })?;
        Ok(Self {
            listener,
            hub: Arc::new(Hub::new(config)),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener")
    }

    pub fn hub(&self) -> Arc<Hub> {
        Arc::clone(&self.hub)
    }

    /// Serves until `shutdown` resolves, then stops executing sessions,
    /// lets in-flight responses finish and waits for every driver to halt.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        let hub = Arc::clone(&self.hub);
        let stopper = Arc::clone(&self.hub);
        axum::serve(self.listener, router(hub))
            .with_graceful_shutdown(async move {
                shutdown.await;
                stopper.begin_shutdown();
            })
            .await?;
        let hub = Arc::clone(&self.hub);
        let _ = tokio::task::spawn_blocking(move || hub.join_drivers()).await;
        Ok(())
    }
}
