//! HTTP and websocket front end. All session state lives in a [`Hub`]
//! behind one mutex; this module only moves frames in and out of it.

pub mod clock;
pub mod hub;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;
use woz_core::config::ServiceConfig;
use woz_core::log::{Durability, LogStore, StoreError};
use woz_core::protocol::PROTOCOL_VERSION;
use woz_core::session::questionnaire::{QUESTIONS, REVERSED_QUESTION, SCALE_MAX, SCALE_MIN};
use woz_core::session::QuestionnaireError;
use woz_core::{Scenario, SimTime};

pub use clock::{Clock, VIRTUAL_EPOCH_MS};
pub use hub::{session_seed, ConnId, Hub, HubStatus};

const TICK_INTERVAL: Duration = Duration::from_millis(250);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("log store: {0}")]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

pub struct AppState {
    hub: Mutex<Hub>,
    pub clock: Clock,
    admin_token: Option<String>,
    heartbeat_s: u64,
}

impl AppState {
    pub fn new(hub: Hub, clock: Clock, admin_token: Option<String>, heartbeat_s: u64) -> AppState {
        AppState { hub: Mutex::new(hub), clock, admin_token, heartbeat_s }
    }

    /// A panic while holding the lock leaves the hub usable; every method
    /// on it completes its bookkeeping before sending anything.
    pub fn hub(&self) -> MutexGuard<'_, Hub> {
        self.hub.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Moves a virtual clock to `target` one second at a time, ticking the
    /// hub at every step. Returns the new time.
    pub fn advance_to(&self, target: SimTime) -> SimTime {
        let mut hub = self.hub();
        let mut now = self.clock.now();
        while now < target {
            now = SimTime((now.millis() + 1000).min(target.millis()));
            self.clock.set(now);
            hub.tick(now);
        }
        self.clock.now()
    }
}

pub fn router(state: Arc<AppState>, assets_dir: &std::path::Path) -> Router {
    let mut app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/health", get(health))
        .route("/bootstrap", get(bootstrap))
        .route("/scenario", get(scenario_info))
        .route("/questionnaire", post(questionnaire))
        .route("/tokens/{token}", get(token_lookup))
        .route("/logs/{session}", get(log_download))
        .nest_service("/assets", ServeDir::new(assets_dir));
    if state.clock.is_virtual() {
        app = app.route("/test/advance", post(test_advance)).route("/test/sync", get(test_sync));
    }
    app.with_state(state)
}

pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    serve: JoinHandle<std::io::Result<()>>,
    ticker: Option<JoinHandle<()>>,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn ws_url(&self) -> String {
        format!("ws://{}/ws", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.ticker.take() {
            t.abort();
        }
        match self.serve.await {
            Ok(Err(e)) => tracing::warn!("server stopped with {e}"),
            Err(e) => tracing::warn!("server task failed: {e}"),
            Ok(Ok(())) => {}
        }
    }

    /// Runs until the process is interrupted.
    pub async fn wait(self) -> std::io::Result<()> {
        match self.serve.await {
            Ok(r) => r,
            Err(e) => Err(std::io::Error::other(e)),
        }
    }
}

/// Opens the log store, recovers interrupted sessions, binds and serves.
pub async fn start(config: &ServiceConfig, scenario: Scenario) -> Result<RunningServer, ServerError> {
    let durability = if config.log.sync { Durability::Sync } else { Durability::Flush };
    let mut store = LogStore::open_with(&config.log.dir, durability)?;
    let recovered = store.recover()?;
    if !recovered.is_empty() {
        tracing::warn!(count = recovered.len(), "recovered interrupted sessions: {}", recovered.join(", "));
    }
    let hub = Hub::new(Arc::new(scenario), config.session, config.lobby, store, config.server.seed);
    let clock = if config.server.virtual_clock { Clock::virtual_at(VIRTUAL_EPOCH_MS) } else { Clock::Wall };
    let state = Arc::new(AppState::new(hub, clock, config.server.admin_token.clone(), config.server.heartbeat_s));
    let listener = TcpListener::bind(&config.server.bind)
        .await
        .map_err(|source| ServerError::Bind { addr: config.server.bind.clone(), source })?;
    let addr =
        listener.local_addr().map_err(|source| ServerError::Bind { addr: config.server.bind.clone(), source })?;
    let app = router(state.clone(), &config.server.assets_dir);
    let (tx, rx) = oneshot::channel::<()>();
    let serve = tokio::spawn(async move {
        let listener = listener.tap_io(|tcp| {
            let _ = tcp.set_nodelay(true);
        });
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    let ticker = (!state.clock.is_virtual()).then(|| tokio::spawn(run_ticker(state.clone())));
    tracing::info!(%addr, "listening");
    Ok(RunningServer { addr, state, shutdown: Some(tx), serve, ticker })
}

async fn run_ticker(state: Arc<AppState>) {
    let mut interval = tokio::time::interval(TICK_INTERVAL);
    let mut last_beat = state.clock.now();
    loop {
        interval.tick().await;
        let mut hub = state.hub();
        let now = state.clock.now();
        hub.tick(now);
        if state.heartbeat_s > 0 && now.since(last_beat) >= state.heartbeat_s * 1000 {
            hub.heartbeat(now);
            last_beat = now;
        }
    }
}

async fn ws_upgrade(State(state): State<Arc<AppState>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| serve_socket(state, socket))
}

async fn serve_socket(state: Arc<AppState>, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let conn = state.hub().connect(tx);
    let writer = tokio::spawn(async move {
        while let Some(text) = rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(msg) = stream.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t.to_string(),
            Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        let mut hub = state.hub();
        let now = state.clock.now();
        hub.handle_text(conn, &text, now);
    }
    {
        let mut hub = state.hub();
        let now = state.clock.now();
        hub.disconnect(conn, now);
    }
    let _ = writer.await;
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let status = state.hub().status();
    Json(json!({
        "status": "ok",
        "now": state.clock.now().millis(),
        "waiting": status.waiting,
        "live_sessions": status.live_sessions,
        "connections": status.connections,
    }))
}

async fn bootstrap(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let hub = state.hub();
    Json(json!({
        "protocol": PROTOCOL_VERSION,
        "ws_path": "/ws",
        "heartbeat_s": state.heartbeat_s,
        "min_read_s": hub.session_config().instructions_min_read_s,
        "time_limit_s": hub.scenario().world.time_limit_s,
        "virtual_clock": state.clock.is_virtual(),
    }))
}

async fn scenario_info(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let hub = state.hub();
    let sc = hub.scenario();
    Json(json!({
        "name": sc.name,
        "hash": sc.hash,
        "time_limit_s": sc.world.time_limit_s,
        "questionnaire": {
            "questions": QUESTIONS,
            "scale": [SCALE_MIN, SCALE_MAX],
            "reversed": [REVERSED_QUESTION],
        },
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionnaireBody {
    token: String,
    answers: Vec<i64>,
    #[serde(default)]
    free_text: Option<String>,
}

fn error(status: StatusCode, code: &str, message: impl ToString) -> Response {
    (status, Json(json!({ "error": code, "message": message.to_string() }))).into_response()
}

async fn questionnaire(State(state): State<Arc<AppState>>, Json(body): Json<QuestionnaireBody>) -> Response {
    let mut hub = state.hub();
    let now = state.clock.now();
    match hub.submit_questionnaire(&body.token, &body.answers, body.free_text, now) {
        Ok((session, record)) => {
            (StatusCode::OK, Json(json!({ "session": session, "answers": record.answers }))).into_response()
        }
        Err(StoreError::Questionnaire(e)) => {
            let (status, code) = match e {
                QuestionnaireError::UnknownToken => (StatusCode::NOT_FOUND, "unknown_token"),
                QuestionnaireError::AlreadySubmitted => (StatusCode::CONFLICT, "already_submitted"),
                QuestionnaireError::OutOfRange { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range"),
                QuestionnaireError::WrongCount(_) => (StatusCode::UNPROCESSABLE_ENTITY, "wrong_count"),
            };
            error(status, code, e)
        }
        Err(e) => {
            tracing::error!("questionnaire: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e)
        }
    }
}

async fn token_lookup(State(state): State<Arc<AppState>>, Path(token): Path<String>) -> Response {
    match state.hub().verify_token(&token) {
        Some(session) => Json(json!({ "session": session })).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown_token", "no session has this token"),
    }
}

async fn log_download(State(state): State<Arc<AppState>>, Path(session): Path<String>, headers: HeaderMap) -> Response {
    let Some(expected) = state.admin_token.as_deref() else {
        return error(StatusCode::NOT_FOUND, "disabled", "log download is not configured");
    };
    let given = headers.get("authorization").and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
    if given != Some(expected) {
        return error(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token");
    }
    match state.hub().load_log(&session) {
        Some(log) => Json(log).into_response(),
        None => error(StatusCode::NOT_FOUND, "unknown_session", "no stored log with this id"),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvanceBody {
    by_ms: Option<u64>,
    to_ms: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SyncReply {
    pub now: u64,
    /// Last sequence number sent to each joined participant.
    pub last_seq: std::collections::BTreeMap<String, u64>,
}

fn sync_reply(state: &AppState) -> SyncReply {
    let hub = state.hub();
    SyncReply { now: state.clock.now().millis(), last_seq: hub.last_seqs() }
}

async fn test_advance(State(state): State<Arc<AppState>>, Json(body): Json<AdvanceBody>) -> Response {
    let now = state.clock.now();
    let target = match (body.by_ms, body.to_ms) {
        (Some(by), None) => now + by,
        (None, Some(to)) => SimTime(to),
        _ => return error(StatusCode::UNPROCESSABLE_ENTITY, "bad_request", "give exactly one of by_ms and to_ms"),
    };
    state.advance_to(target);
    Json(sync_reply(&state)).into_response()
}

async fn test_sync(State(state): State<Arc<AppState>>) -> Json<SyncReply> {
    Json(sync_reply(&state))
}
