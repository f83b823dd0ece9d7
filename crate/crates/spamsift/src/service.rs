//! HTTP API over a single controller.
//!
//! One writer thread owns the [`Controller`] and applies commands in arrival
//! order. After every command (and when a retrain drops the controller into
//! training mode) it publishes an immutable copy; GET handlers read the latest
//! copy and never wait for the writer. Every new log record is appended to
//! `events.ndjson` in the state directory before the reply goes out, and each
//! new model is written next to it as `model.ssvm` + `dictionary.txt`.

use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc, RwLock};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use spamsift_core::controller::{Command, LogRecord, QueryItem, Reply, ReplayError};
use spamsift_core::{Controller, ControllerConfig, ControllerError, Corpus, Label};
use tokio::sync::oneshot;

use crate::formats::{self, EventLogFile, FormatError};

pub const EVENT_LOG: &str = "events.ndjson";
pub const MODEL_FILE: &str = "model.ssvm";
pub const DICTIONARY_FILE: &str = "dictionary.txt";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("corrupt event log {}: {err}", path.display())]
    Replay { path: PathBuf, err: ReplayError },
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
}

/// Where the service keeps its state. Without one nothing is persisted.
pub struct StateDir {
    dir: PathBuf,
}

impl StateDir {
    pub fn new(dir: impl Into<PathBuf>) -> Result<StateDir, ServiceError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|err| ServiceError::Io {
            path: dir.clone(),
            err,
        })?;
        Ok(StateDir { dir })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn event_log(&self) -> PathBuf {
        self.dir.join(EVENT_LOG)
    }

    /// Replays the stored log if there is one, otherwise starts from
    /// `config` and delivers `inbox` (keeping its message ids). A stored log
    /// carries its own configuration, which wins over `config`.
    pub fn open(&self, config: ControllerConfig, inbox: Option<&Corpus>) -> Result<(Controller, EventLogFile), ServiceError> {
        let path = self.event_log();
        let records: Vec<LogRecord> = if path.exists() {
            formats::load_event_log(&path)?
        } else {
            Vec::new()
        };
        let controller = if records.is_empty() {
            let mut c = Controller::new(config)?;
            for m in inbox.map(Corpus::messages).unwrap_or_default() {
                c.apply(Command::Deliver {
                    request_id: None,
                    message_id: Some(m.id.clone()),
                    subject: m.subject.clone(),
                    body: m.body.clone(),
                })?;
            }
            c
        } else {
            if inbox.is_some() {
                tracing::warn!("state directory already has an event log; ignoring the inbox corpus");
            }
            Controller::replay(&records).map_err(|err| ServiceError::Replay {
                path: path.clone(),
                err,
            })?
        };
        let log = EventLogFile::append(&path, records.len())?;
        Ok((controller, log))
    }

    fn save_snapshot(&self, c: &Controller) -> Result<(), FormatError> {
        if let Some(s) = c.snapshot() {
            formats::save_model(&self.dir.join(MODEL_FILE), &s.model)?;
            formats::save_dictionary(&self.dir.join(DICTIONARY_FILE), &s.dictionary, &c.config().vectorizer)?;
        }
        Ok(())
    }
}

/// What the writer hands back for one command: its result and the state
/// right after it.
pub struct Applied {
    pub result: Result<Reply, ControllerError>,
    pub state: Arc<Controller>,
}

enum Job {
    Apply(Command, oneshot::Sender<Applied>),
    Stop,
}

type Published = Arc<RwLock<Arc<Controller>>>;

fn publish(slot: &Published, c: &Controller) -> Arc<Controller> {
    let snap = Arc::new(c.clone());
    *slot.write().unwrap_or_else(|e| e.into_inner()) = snap.clone();
    snap
}

/// Cheap to clone; shared by every request handler.
#[derive(Clone)]
pub struct ServiceHandle {
    jobs: mpsc::Sender<Job>,
    current: Published,
}

#[derive(Debug, thiserror::Error)]
#[error("the controller has shut down")]
pub struct Stopped;

impl ServiceHandle {
    /// Latest published state.
    pub fn snapshot(&self) -> Arc<Controller> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Queues `cmd` behind every command sent before it.
    pub async fn apply(&self, cmd: Command) -> Result<Applied, Stopped> {
        let (tx, rx) = oneshot::channel();
        self.jobs.send(Job::Apply(cmd, tx)).map_err(|_| Stopped)?;
        rx.await.map_err(|_| Stopped)
    }
}

pub struct Service {
    handle: ServiceHandle,
    writer: JoinHandle<Controller>,
}

impl Service {
    pub fn start(controller: Controller, state: Option<(StateDir, EventLogFile)>) -> Service {
        let current: Published = Arc::new(RwLock::new(Arc::new(controller.clone())));
        let (jobs, rx) = mpsc::channel();
        let slot = current.clone();
        let writer = std::thread::Builder::new()
            .name("controller".into())
            .spawn(move || writer_loop(controller, rx, slot, state))
            .expect("spawn controller thread");
        Service {
            handle: ServiceHandle { jobs, current },
            writer,
        }
    }

    pub fn handle(&self) -> ServiceHandle {
        self.handle.clone()
    }

    pub fn router(&self) -> Router {
        router(self.handle())
    }

    /// Finishes the commands already queued, flushes the log and returns
    /// the final controller. Later requests get 503.
    pub fn stop(self) -> Controller {
        let _ = self.handle.jobs.send(Job::Stop);
        self.writer.join().expect("controller thread panicked")
    }
}

fn writer_loop(
    mut c: Controller,
    rx: mpsc::Receiver<Job>,
    slot: Published,
    mut state: Option<(StateDir, EventLogFile)>,
) -> Controller {
    let persist = |c: &Controller, state: &mut Option<(StateDir, EventLogFile)>, new_model: bool| {
        if let Some((dir, log)) = state {
            if let Err(e) = log.sync(c.log()) {
                tracing::error!("appending to {}: {e}", log.path().display());
            }
            if new_model {
                if let Err(e) = dir.save_snapshot(c) {
                    tracing::error!("writing model snapshot: {e}");
                }
            }
        }
    };
    persist(&c, &mut state, true);
    while let Ok(job) = rx.recv() {
        let (cmd, reply) = match job {
            Job::Apply(cmd, reply) => (cmd, reply),
            Job::Stop => break,
        };
        let version = c.model_version();
        let result = c.apply_observed(cmd, &mut |tm| {
            publish(&slot, tm);
        });
        persist(&c, &mut state, c.model_version() != version);
        let snap = publish(&slot, &c);
        // the client may have gone away; the command still happened
        let _ = reply.send(Applied { result, state: snap });
    }
    persist(&c, &mut state, false);
    c
}

/// Runs the API on `listener` until `shutdown` resolves, then stops the
/// writer and returns the final controller.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Service,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<Controller> {
    let app = service.router();
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(tokio::task::spawn_blocking(move || service.stop()).await.expect("stop task"))
}

// ---- HTTP ---------------------------------------------------------------

pub fn router(handle: ServiceHandle) -> Router {
    Router::new()
        .route("/status", get(status))
        .route("/mailbox", get(mailbox))
        .route("/message/{*id}", get(message))
        .route("/messages", post(deliver))
        .route("/queries", get(queries))
        .route("/labels", post(label))
        .route("/feedback", post(feedback))
        .route("/metrics", get(metrics))
        .route("/admin/retrain", post(retrain))
        .with_state(handle)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub enum ApiError {
    Controller(ControllerError),
    NotFound(String),
    BadBody(String),
    Stopped,
    Unexpected(String),
}

impl From<ControllerError> for ApiError {
    fn from(e: ControllerError) -> Self {
        ApiError::Controller(e)
    }
}

impl From<Stopped> for ApiError {
    fn from(_: Stopped) -> Self {
        ApiError::Stopped
    }
}

/// HTTP status and stable error code for a controller error.
pub fn error_status(e: &ControllerError) -> (StatusCode, &'static str) {
    use ControllerError::*;
    match e {
        InvalidConfig(_) => (StatusCode::INTERNAL_SERVER_ERROR, "invalid_config"),
        InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        UnknownMessage(_) => (StatusCode::NOT_FOUND, "unknown_message"),
        DuplicateMessage(_) => (StatusCode::CONFLICT, "duplicate_message"),
        AlreadyLabeled(_) => (StatusCode::CONFLICT, "already_labeled"),
        WrongMode { .. } => (StatusCode::CONFLICT, "wrong_mode"),
        NotClassified(_) => (StatusCode::UNPROCESSABLE_ENTITY, "not_classified"),
        NotMisclassified { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "not_misclassified"),
        InsufficientLabels { .. } => (StatusCode::CONFLICT, "insufficient_labels"),
        RequestIdReuse(_) => (StatusCode::CONFLICT, "request_id_reuse"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::Controller(e) => {
                let (s, c) = error_status(&e);
                (s, c, e.to_string())
            }
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, "unknown_message", format!("unknown message {id:?}")),
            ApiError::BadBody(m) => (StatusCode::BAD_REQUEST, "bad_body", m),
            ApiError::Stopped => (StatusCode::SERVICE_UNAVAILABLE, "stopped", Stopped.to_string()),
            ApiError::Unexpected(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        };
        let body = ErrorBody {
            error: code.into(),
            message,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parses a JSON body; an empty body is `T::default()` when allowed.
fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes, empty: Option<T>) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        if let Some(v) = empty {
            return Ok(v);
        }
    }
    serde_json::from_slice(body).map_err(|e| ApiError::BadBody(e.to_string()))
}

fn unexpected(r: Reply) -> ApiError {
    ApiError::Unexpected(format!("unexpected reply {r:?}"))
}

async fn status(State(h): State<ServiceHandle>) -> Json<spamsift_core::controller::StatusView> {
    Json(h.snapshot().status())
}

#[derive(Debug, Default, Deserialize)]
pub struct MailboxQuery {
    pub limit: Option<usize>,
}

async fn mailbox(
    State(h): State<ServiceHandle>,
    Query(q): Query<MailboxQuery>,
) -> Json<Vec<spamsift_core::controller::MailboxItem>> {
    Json(h.snapshot().mailbox_view(q.limit))
}

async fn message(State(h): State<ServiceHandle>, UrlPath(id): UrlPath<String>) -> ApiResult<spamsift_core::controller::MessageView> {
    h.snapshot().message_view(&id).map(Json).ok_or(ApiError::NotFound(id))
}

async fn metrics(State(h): State<ServiceHandle>) -> Json<spamsift_core::controller::MetricsView> {
    Json(h.snapshot().metrics())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewMessage {
    #[serde(default)]
    pub request_id: Option<String>,
    #[serde(default)]
    pub message_id: Option<String>,
    pub subject: String,
    pub body: String,
}

async fn deliver(State(h): State<ServiceHandle>, body: Bytes) -> ApiResult<spamsift_core::controller::DeliveryOutcome> {
    let m: NewMessage = parse_body(&body, None)?;
    let cmd = Command::Deliver {
        request_id: m.request_id,
        message_id: m.message_id,
        subject: m.subject,
        body: m.body,
    };
    match h.apply(cmd).await?.result? {
        Reply::Delivered(d) => Ok(Json(d)),
        r => Err(unexpected(r)),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct QueriesQuery {
    pub n: Option<usize>,
}

/// Issues a batch if none is pending. In training mode there is nothing to
/// ask, so the list is empty.
async fn queries(State(h): State<ServiceHandle>, Query(q): Query<QueriesQuery>) -> ApiResult<Vec<QueryItem>> {
    let n = q.n.unwrap_or_else(|| h.snapshot().config().batch_size);
    let applied = h.apply(Command::Queries { n }).await?;
    match applied.result {
        Ok(Reply::Queries { batch }) => Ok(Json(
            batch
                .ids
                .iter()
                .zip(&batch.scores)
                .map(|(id, &score)| QueryItem {
                    id: id.clone(),
                    subject: applied.state.message(id).map(|m| m.message.subject.clone()).unwrap_or_default(),
                    score,
                })
                .collect(),
        )),
        Err(ControllerError::WrongMode { .. }) => Ok(Json(Vec::new())),
        Err(e) => Err(e.into()),
        Ok(r) => Err(unexpected(r)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRequest {
    #[serde(default)]
    pub request_id: Option<String>,
    pub message_id: String,
    pub label: Label,
}

async fn label(State(h): State<ServiceHandle>, body: Bytes) -> ApiResult<spamsift_core::controller::LabelOutcome> {
    let r: LabelRequest = parse_body(&body, None)?;
    let cmd = Command::Label {
        request_id: r.request_id,
        message_id: r.message_id,
        label: r.label,
    };
    match h.apply(cmd).await?.result? {
        Reply::Labeled(o) => Ok(Json(o)),
        r => Err(unexpected(r)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackRequest {
    #[serde(default)]
    pub request_id: Option<String>,
    pub message_id: String,
    pub corrected_label: Label,
}

async fn feedback(State(h): State<ServiceHandle>, body: Bytes) -> ApiResult<spamsift_core::controller::FeedbackOutcome> {
    let r: FeedbackRequest = parse_body(&body, None)?;
    let cmd = Command::Feedback {
        request_id: r.request_id,
        message_id: r.message_id,
        corrected_label: r.corrected_label,
    };
    match h.apply(cmd).await?.result? {
        Reply::Feedback(o) => Ok(Json(o)),
        r => Err(unexpected(r)),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RetrainRequest {
    #[serde(default)]
    pub request_id: Option<String>,
}

async fn retrain(State(h): State<ServiceHandle>, body: Bytes) -> ApiResult<spamsift_core::controller::RetrainOutcome> {
    let r: RetrainRequest = parse_body(&body, Some(RetrainRequest::default()))?;
    match h.apply(Command::Retrain { request_id: r.request_id }).await?.result? {
        Reply::Retrained(o) => Ok(Json(o)),
        r => Err(unexpected(r)),
    }
}
