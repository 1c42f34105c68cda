//! REST service hosting live adaptive-experiment sessions.
//!
//! Each session is persisted as an append-only JSON-lines event log under the
//! data directory and rebuilt by replay on startup. Writes to one session are
//! serialized; reads see the last published state and never block on an
//! update in progress. Design search runs on a blocking worker, and
//! `next-design` answers 202 with `Retry-After` until the proposal is ready.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tokio::task::JoinHandle;

use simsel::session::{append_event, Proposal, SessionConfig, SessionState, SCHEMA_VERSION};
use simsel::tasks::{registry, TASK_NAMES};
use simsel::{EngineConfig, Method, Phase, Session};

mod error;
pub use error::ApiError;

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Required bearer token, if any.
    pub token: Option<String>,
    /// How long `next-design` waits for a running search before answering 202.
    pub proposal_wait: Duration,
    /// Advertised in `Retry-After` on a 202.
    pub retry_after: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            token: None,
            proposal_wait: Duration::from_millis(200),
            retry_after: Duration::from_secs(1),
        }
    }
}

struct Slot {
    published: RwLock<Arc<Session>>,
    writer: Mutex<()>,
    job: Mutex<Option<JoinHandle<simsel::Result<Proposal>>>>,
    log: PathBuf,
}

impl Slot {
    fn current(&self) -> Arc<Session> {
        self.published.read().expect("session lock").clone()
    }

    fn publish(&self, s: Session) {
        *self.published.write().expect("session lock") = Arc::new(s);
    }

    /// Starts a design search for the current trial unless one is running.
    async fn prefetch(&self) {
        let s = self.current();
        if s.phase() != Phase::Proposing {
            return;
        }
        let mut job = self.job.lock().await;
        if job.is_none() {
            *job = Some(tokio::task::spawn_blocking(move || s.compute_proposal()));
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    /// Opens the data directory and replays every session log found there.
    pub fn open(config: ServiceConfig) -> simsel::Result<Arc<AppState>> {
        std::fs::create_dir_all(&config.data_dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&config.data_dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let s = Session::read_log(&path).map_err(|e| {
                    simsel::Error::Config(format!("cannot replay session log {}: {e}", path.display()))
                })?;
                sessions.insert(s.id.clone(), Arc::new(new_slot(s, path)));
            }
        }
        Ok(Arc::new(AppState {
            config,
            sessions: RwLock::new(sessions),
        }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("registry lock").len()
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        self.sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.config.data_dir.join(format!("{id}.jsonl"))
    }
}

fn new_slot(s: Session, log: PathBuf) -> Slot {
    Slot {
        published: RwLock::new(Arc::new(s)),
        writer: Mutex::new(()),
        job: Mutex::new(None),
        log,
    }
}

/// Appends the events `next` holds beyond the first `from`.
fn persist(log: &Path, next: &Session, from: usize) -> ApiResult<()> {
    for e in &next.events()[from..] {
        append_event(log, e).map_err(|e| ApiError::internal(format!("cannot write session log: {e}")))?;
    }
    Ok(())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next-design", get(next_design))
        .route("/sessions/{id}/response", post(submit_response))
        .route("/sessions/{id}/posterior", get(get_posterior))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Binds `addr` and serves in the background. Returns the bound address.
pub async fn spawn(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(state);
    Ok((local, tokio::spawn(async move { axum::serve(listener, app).await })))
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

async fn list_tasks() -> Json<serde_json::Value> {
    Json(json!({"v": SCHEMA_VERSION, "tasks": registry()}))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub v: Option<u32>,
    pub task: String,
    pub method: Method,
    pub budget: usize,
    /// Drawn at random when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub engine: Option<EngineConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitResponse {
    #[serde(default)]
    pub v: Option<u32>,
    /// Guards against duplicate submissions when given.
    #[serde(default)]
    pub trial_index: Option<u64>,
    pub response: simsel::Response,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Pending {
    pub v: u32,
    pub session_id: String,
    pub trial_index: u64,
    pub status: String,
    pub retry_after_ms: u64,
}

fn check_version(v: Option<u32>) -> ApiResult<()> {
    match v {
        Some(v) if v != SCHEMA_VERSION => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "unsupported_version",
            format!("schema version {v} is not supported, expected {SCHEMA_VERSION}"),
        )),
        _ => Ok(()),
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: std::result::Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionState>)> {
    let Json(req) = body?;
    check_version(req.v)?;
    if !TASK_NAMES.contains(&req.task.as_str()) {
        return Err(ApiError::not_found(format!("no task `{}`", req.task)));
    }
    let config = SessionConfig {
        task: req.task,
        method: req.method,
        budget: req.budget,
        seed: req.seed.unwrap_or_else(rand::random),
        engine: req.engine.unwrap_or_default(),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = {
        let id = id.clone();
        tokio::task::spawn_blocking(move || Session::create(id, config)).await??
    };
    let log = state.log_path(&id);
    persist(&log, &session, 0)?;
    let body = session.state();
    let slot = Arc::new(new_slot(session, log));
    state.sessions.write().expect("registry lock").insert(id, slot.clone());
    slot.prefetch().await;
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionState>> {
    Ok(Json(state.slot(&id)?.current().state()))
}

async fn get_posterior(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let s = state.slot(&id)?.current();
    let snap = tokio::task::spawn_blocking(move || s.snapshot()).await?;
    Ok(Json(snap).into_response())
}

async fn next_design(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let slot = state.slot(&id)?;
    let s = slot.current();
    if let Some(p) = s.design_payload() {
        return Ok(Json(p).into_response());
    }
    if s.phase() == Phase::Finished {
        return Err(simsel::Error::Phase("session is finished".into()).into());
    }
    slot.prefetch().await;

    let outcome = {
        let mut job = slot.job.lock().await;
        let Some(handle) = job.as_mut() else {
            // Another request committed the proposal in the meantime.
            return current_design(&slot);
        };
        let done = if handle.is_finished() {
            Some(handle.await)
        } else {
            tokio::time::timeout(state.config.proposal_wait, &mut *handle).await.ok()
        };
        if done.is_some() {
            *job = None;
        }
        done
    };
    let Some(result) = outcome else {
        let retry = state.config.retry_after;
        let body = Pending {
            v: SCHEMA_VERSION,
            session_id: id,
            trial_index: s.belief().trial_index,
            status: "pending".into(),
            retry_after_ms: retry.as_millis() as u64,
        };
        let secs = retry.as_secs_f64().ceil().max(1.0) as u64;
        let mut resp = (StatusCode::ACCEPTED, Json(body)).into_response();
        resp.headers_mut()
            .insert(header::RETRY_AFTER, HeaderValue::from_str(&secs.to_string()).expect("ascii"));
        return Ok(resp);
    };
    let proposal = result??;

    let _w = slot.writer.lock().await;
    let mut next = (*slot.current()).clone();
    let from = next.events().len();
    next.accept_proposal(proposal)?;
    persist(&slot.log, &next, from)?;
    slot.publish(next);
    current_design(&slot)
}

fn current_design(slot: &Slot) -> ApiResult<Response> {
    slot.current()
        .design_payload()
        .map(|p| Json(p).into_response())
        .ok_or_else(|| ApiError::internal("no design is pending after the proposal was committed"))
}

async fn submit_response(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: std::result::Result<Json<SubmitResponse>, JsonRejection>,
) -> ApiResult<Response> {
    let slot = state.slot(&id)?;
    let Json(req) = body?;
    check_version(req.v)?;
    let snap = {
        let _w = slot.writer.lock().await;
        let mut next = (*slot.current()).clone();
        let from = next.events().len();
        let (next, snap) = tokio::task::spawn_blocking(move || {
            next.submit_response(req.response, req.trial_index).map(|snap| (next, snap))
        })
        .await??;
        persist(&slot.log, &next, from)?;
        slot.publish(next);
        snap
    };
    slot.prefetch().await;
    Ok(Json(snap).into_response())
}
