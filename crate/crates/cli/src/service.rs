//! Session service. Each session has an append-only event log; every event
//! carries the session status right after it, so replaying the log from the
//! start reproduces the status. At most one pipeline run per session is in
//! flight; requests that would start another get 409.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;
use verna_agents::backend::LlmBackend;
use verna_agents::{run_conventional, run_pipeline_observed, AgentConfigs, Caps, Llm, Mode, PipelineEvent, PlanOutcome, Planner, PlannerKind, SessionState, Status};
use verna_core::scene::{bundled_scene, bundled_scene_ids, emit_scene, load_scene_bytes, Scene};
use verna_core::Trajectory;
use verna_sim::experiment::trajectory_rows;

/// Seconds between baseline waypoints.
pub const WAYPOINT_DT: f64 = 0.1;

pub struct ServiceConfig {
    pub backend: Arc<dyn LlmBackend>,
    pub agents: AgentConfigs,
    pub planner: Planner,
    pub caps: Caps,
    /// Write-through directory for per-session artifacts.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub kind: String,
    pub payload: Value,
    /// Session status once this event has happened.
    pub status: Status,
}

struct Log {
    events: Vec<SessionEvent>,
    status: Status,
    trajectory: Option<Value>,
}

struct Session {
    id: String,
    scene_id: String,
    mode: Mode,
    kind: PlannerKind,
    state: Mutex<SessionState>,
    log: Mutex<Log>,
    busy: AtomicBool,
    seq: watch::Sender<u64>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Session {
    fn push(&self, kind: &str, payload: Value, status: Status) -> u64 {
        self.append(kind, payload, status, false)
    }

    /// Appends the last event of an operation and frees the session in one
    /// step: whoever sees the event can start the next operation.
    fn push_final(&self, kind: &str, payload: Value, status: Status) -> u64 {
        self.append(kind, payload, status, true)
    }

    fn append(&self, kind: &str, payload: Value, status: Status, release: bool) -> u64 {
        let seq = {
            let mut log = lock(&self.log);
            let seq = log.events.len() as u64 + 1;
            log.events.push(SessionEvent { seq, kind: kind.to_string(), payload, status });
            log.status = status;
            if release {
                self.release();
            }
            seq
        };
        self.seq.send_replace(seq);
        seq
    }

    fn pipeline_parts(ev: &PipelineEvent) -> (String, Value) {
        let v = serde_json::to_value(ev).expect("events serialize");
        (v["kind"].as_str().unwrap_or("Unknown").to_string(), v["payload"].clone())
    }

    fn status(&self) -> Status {
        lock(&self.log).status
    }

    fn events_since(&self, since: u64) -> Vec<SessionEvent> {
        lock(&self.log).events.iter().filter(|e| e.seq > since).cloned().collect()
    }

    fn claim(&self) -> bool {
        self.busy.compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst).is_ok()
    }

    fn release(&self) {
        self.busy.store(false, Ordering::SeqCst);
    }

    /// Status right after a pipeline event. Questions end a conversation-mode
    /// run; in one-shot mode the task is re-sent instead.
    fn status_after(&self, ev: &PipelineEvent) -> Status {
        match ev {
            PipelineEvent::PlanReady { .. } if self.mode == Mode::Conversation => Status::AwaitingDecision,
            PipelineEvent::PlanReady { .. } => Status::Accepted,
            PipelineEvent::PlanFailed { .. } => Status::Failed,
            PipelineEvent::AssistantMessage { question: true, .. } if self.mode == Mode::Conversation => Status::AwaitingUser,
            _ => Status::Planning,
        }
    }

    fn info(&self) -> Value {
        let log = lock(&self.log);
        json!({
            "session_id": self.id,
            "scene_id": self.scene_id,
            "mode": self.mode,
            "planner": self.kind,
            "status": log.status,
            "busy": self.busy.load(Ordering::SeqCst),
            "last_seq": log.events.len(),
        })
    }
}

struct Inner {
    cfg: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        AppState(Arc::new(Inner { cfg, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) }))
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        lock(&self.0.sessions).get(id).cloned().ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session '{id}'")))
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn conflict(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::CONFLICT, msg.into())
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenes", get(list_scenes))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/message", post(post_message))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/trajectory", get(trajectory))
        .route("/sessions/{id}/decision", post(decision))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn scene_json(scene: &Scene) -> Value {
    serde_json::from_str(&emit_scene(scene)).expect("emitted scenes are JSON")
}

async fn list_scenes() -> Json<Vec<Value>> {
    Json(bundled_scene_ids().filter_map(bundled_scene).map(|s| scene_json(&s)).collect())
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    scene_id: Option<String>,
    scene: Option<Value>,
    #[serde(default = "conversation")]
    mode: Mode,
    #[serde(default = "verna")]
    planner: PlannerKind,
}

fn conversation() -> Mode {
    Mode::Conversation
}

fn verna() -> PlannerKind {
    PlannerKind::Verna
}

async fn create_session(State(app): State<AppState>, Json(req): Json<CreateRequest>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let scene = match (&req.scene_id, &req.scene) {
        (Some(id), None) => bundled_scene(id).ok_or_else(|| bad_request(format!("unknown scene_id '{id}'")))?,
        (None, Some(v)) => load_scene_bytes(v.to_string().as_bytes()).map_err(|e| bad_request(format!("invalid scene: {e}")))?,
        _ => return Err(bad_request("give exactly one of scene_id and scene")),
    };
    let id = format!("s{}", app.0.next_id.fetch_add(1, Ordering::SeqCst));
    let session = Arc::new(Session {
        id: id.clone(),
        scene_id: scene.scenario_id.clone(),
        mode: req.mode,
        kind: req.planner,
        state: Mutex::new(SessionState::new(scene, req.mode, req.planner)),
        log: Mutex::new(Log { events: Vec::new(), status: Status::AwaitingUser, trajectory: None }),
        busy: AtomicBool::new(false),
        seq: watch::channel(0).0,
    });
    lock(&app.0.sessions).insert(id.clone(), session);
    log::info!("created session {id}");
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "status": Status::AwaitingUser }))))
}

async fn session_info(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(app.session(&id)?.info()))
}

#[derive(Debug, Deserialize)]
struct MessageRequest {
    text: String,
}

async fn post_message(State(app): State<AppState>, Path(id): Path<String>, Json(req): Json<MessageRequest>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let s = app.session(&id)?;
    let text = req.text.trim().to_string();
    if text.is_empty() {
        return Err(bad_request("empty message"));
    }
    if !s.claim() {
        return Err(conflict("a pipeline step is in flight for this session"));
    }
    match s.status() {
        Status::Accepted => {
            s.release();
            return Err(conflict("the session is closed"));
        }
        Status::AwaitingDecision => {
            s.release();
            return Err(conflict("a plan is awaiting a decision"));
        }
        _ => {}
    }
    let seq = s.push("UserMessage", json!({ "text": text }), Status::Planning);
    start_run(&app, s, Some(text));
    Ok((StatusCode::ACCEPTED, Json(json!({ "seq": seq }))))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DecisionKind {
    Accept,
    Reject,
}

#[derive(Debug, Deserialize)]
struct DecisionRequest {
    decision: DecisionKind,
    comment: Option<String>,
}

async fn decision(State(app): State<AppState>, Path(id): Path<String>, Json(req): Json<DecisionRequest>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let s = app.session(&id)?;
    if !s.claim() {
        return Err(conflict("a pipeline step is in flight for this session"));
    }
    let accept = matches!(req.decision, DecisionKind::Accept);
    let decided = lock(&s.state).decide(accept, req.comment.as_deref());
    if let Err(e) = decided {
        s.release();
        return Err(conflict(e));
    }
    let payload = json!({ "decision": if accept { "accept" } else { "reject" }, "comment": req.comment });
    if accept {
        let seq = s.push_final("Decision", payload, Status::Accepted);
        write_through(&app, &s);
        Ok((StatusCode::OK, Json(json!({ "seq": seq, "status": Status::Accepted }))))
    } else {
        let seq = s.push("Decision", payload, Status::Planning);
        start_run(&app, s, None);
        Ok((StatusCode::ACCEPTED, Json(json!({ "seq": seq, "status": Status::Planning }))))
    }
}

/// Runs the pipeline on a blocking thread; the caller has claimed the session.
fn start_run(app: &AppState, s: Arc<Session>, message: Option<String>) {
    let app = app.clone();
    tokio::task::spawn_blocking(move || {
        let last = match catch_unwind(AssertUnwindSafe(|| run_session(&app, &s, message))) {
            Ok(last) => last,
            Err(panic) => {
                let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|m| m.to_string())).unwrap_or_default();
                log::error!("session {} pipeline panicked: {msg}", s.id);
                lock(&s.state).status = Status::Failed;
                Some(("PlanFailed".to_string(), json!({ "reason": "internal_error", "message": msg }), Status::Failed))
            }
        };
        match last {
            Some((kind, payload, status)) => {
                s.push_final(&kind, payload, status);
            }
            None => s.release(),
        }
        write_through(&app, &s);
    });
}

type Pending = (String, Value, Status);

/// Runs the pipeline and returns the event that ends the run, unpublished.
fn run_session(app: &AppState, s: &Session, message: Option<String>) -> Option<Pending> {
    let cfg = &app.0.cfg;
    let llm = Llm { backend: cfg.backend.as_ref(), configs: &cfg.agents };
    let mut state = lock(&s.state);
    if let Some(m) = &message {
        state.submit_user_message(m);
    }
    let mut last: Option<Pending> = None;
    let mut obs = |ev: PipelineEvent| {
        let status = s.status_after(&ev);
        let (kind, payload) = Session::pipeline_parts(&ev);
        if let Some((k, p, st)) = last.take() {
            s.push(&k, p, st);
        }
        if status == Status::Planning {
            s.push(&kind, payload, status);
        } else {
            last = Some((kind, payload, status));
        }
    };
    let trajectory = match s.kind {
        PlannerKind::Verna => match run_pipeline_observed(&mut state, &llm, &cfg.planner, &cfg.caps, &mut obs) {
            PlanOutcome::Accepted(p) => Some(json!({ "dt": p.trajectory.dt(), "stl_text": p.stl_text, "rows": trajectory_rows(&p.trajectory) })),
            _ => None,
        },
        PlannerKind::Conventional => match run_conventional(&mut state, &llm, &cfg.caps, WAYPOINT_DT, &mut obs) {
            PlanOutcome::Accepted(p) => {
                let t = Trajectory::new(p.waypoints.iter().map(|w| w.to_vec()).collect(), WAYPOINT_DT).expect("finite waypoints");
                Some(json!({ "dt": WAYPOINT_DT, "stl_text": null, "rows": trajectory_rows(&t) }))
            }
            _ => None,
        },
    };
    if let Some(t) = trajectory {
        lock(&s.log).trajectory = Some(t);
    }
    let logged = last.as_ref().map_or(s.status(), |l| l.2);
    if state.status != logged {
        log::error!("session {}: event log says {logged:?}, session is {:?}", s.id, state.status);
    }
    last
}

fn write_through(app: &AppState, s: &Session) {
    let Some(root) = &app.0.cfg.out_dir else { return };
    let dir = root.join(&s.id);
    let result = (|| -> std::io::Result<()> {
        std::fs::create_dir_all(&dir)?;
        let (events, traj) = {
            let log = lock(&s.log);
            (serde_json::to_string_pretty(&log.events)?, log.trajectory.clone())
        };
        std::fs::write(dir.join("events.json"), events)?;
        if let Some(t) = traj {
            std::fs::write(dir.join("trajectory.json"), serde_json::to_string(&t["rows"])?)?;
        }
        let transcript = serde_json::to_string_pretty(&lock(&s.state).transcript)?;
        std::fs::write(dir.join("transcript.json"), transcript)
    })();
    if let Err(e) = result {
        log::warn!("cannot write artifacts of session {} to {}: {e}", s.id, dir.display());
    }
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
    /// Long-poll wait when nothing newer than `since` exists yet.
    #[serde(default = "default_wait")]
    timeout_ms: u64,
}

fn default_wait() -> u64 {
    25_000
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Result<Response, ApiError> {
    let s = app.session(&id)?;
    if let Ok(ws) = ws {
        return Ok(ws.on_upgrade(move |socket| push_events(socket, s, q.since)));
    }
    let mut rx = s.seq.subscribe();
    let wait = async {
        while *rx.borrow_and_update() <= q.since {
            if rx.changed().await.is_err() {
                break;
            }
        }
    };
    let _ = tokio::time::timeout(Duration::from_millis(q.timeout_ms), wait).await;
    Ok(Json(s.events_since(q.since)).into_response())
}

async fn push_events(mut socket: WebSocket, s: Arc<Session>, since: u64) {
    let mut rx = s.seq.subscribe();
    let mut sent = since;
    loop {
        rx.borrow_and_update();
        for e in s.events_since(sent) {
            sent = e.seq;
            let text = serde_json::to_string(&e).expect("events serialize");
            if socket.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
        tokio::select! {
            changed = rx.changed() => if changed.is_err() { return },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                _ => {}
            },
        }
    }
}

async fn trajectory(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = app.session(&id)?;
    let t = lock(&s.log).trajectory.clone();
    t.map(Json).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "no trajectory yet".into()))
}
