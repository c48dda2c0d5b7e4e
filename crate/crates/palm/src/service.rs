//! HTTP API over in-memory sessions.
//!
//! A session holds one program and its extraction settings. Extraction
//! builds the tree; a run generates tests on a blocking worker thread and
//! publishes a snapshot of its state after every trial, which is what
//! `GET /sessions/{id}/runs/current` returns.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use palm_core::ast::Program;
use palm_core::corpus::{self, EXAMPLES};
use palm_core::driver::{self, generate_all, Domains, RunHooks, RunState, RunStatus, TrialRecord, DEFAULT_TRIAL_LIMIT};
use palm_core::extract::ExtractionConfig;
use palm_core::testcase::TestCase;
use palm_core::tree::{Status, SymTree};
use palm_core::{Analysis, ParseError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::BackendSpec;
use crate::runlog::unix_millis;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }
    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let text = if bytes.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &bytes[..] };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub message: String,
    pub line: u32,
    pub col: u32,
}

impl From<&ParseError> for Diagnostic {
    fn from(e: &ParseError) -> Self {
        Diagnostic { message: e.to_string(), line: e.span().line, col: e.span().col }
    }
}

struct RunHandle {
    id: u64,
    cancel: Arc<AtomicBool>,
    snapshot: Arc<Mutex<RunState>>,
    active: Arc<AtomicBool>,
}

struct Session {
    source: String,
    config: ExtractionConfig,
    domains: Domains,
    program: Result<Program, ParseError>,
    analysis: Option<Arc<Analysis>>,
    /// Tree with statuses from finished runs and user verifications.
    tree: Option<SymTree>,
    history: Vec<TrialRecord>,
    prompts: Arc<Mutex<HashMap<u32, String>>>,
    run: Option<RunHandle>,
}

impl Session {
    fn run_active(&self) -> bool {
        self.run.as_ref().is_some_and(|r| r.active.load(Ordering::SeqCst))
    }

    fn analysis(&self) -> ApiResult<Arc<Analysis>> {
        self.analysis.clone().ok_or_else(|| ApiError::conflict("paths have not been extracted yet"))
    }

    /// Current tree and history, taken from the active run when there is one.
    fn view(&self) -> Option<(SymTree, Vec<TrialRecord>)> {
        let tree = self.tree.clone()?;
        match &self.run {
            Some(r) if r.active.load(Ordering::SeqCst) => {
                let snap = r.snapshot.lock().unwrap();
                let mut history = self.history.clone();
                history.extend(snap.trials.iter().cloned());
                Some((merge_covered(snap.tree.clone(), &tree), history))
            }
            _ => Some((tree, self.history.clone())),
        }
    }
}

/// `into` with every leaf covered in `from` marked covered.
fn merge_covered(mut into: SymTree, from: &SymTree) -> SymTree {
    for &p in from.leaves().keys() {
        if from.status(p) == Some(Status::Covered) {
            let _ = into.mark_status(p, Status::Covered);
        }
    }
    into
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;

impl AppState {
    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))
    }
}

pub fn router() -> Router {
    router_with_state(Arc::new(AppState::default()))
}

pub fn router_with_state(state: Shared) -> Router {
    Router::new()
        .route("/examples", get(examples))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(export_session).delete(delete_session))
        .route("/sessions/{id}/extract", post(extract))
        .route("/sessions/{id}/tree", get(tree))
        .route("/sessions/{id}/runs", post(start_run))
        .route("/sessions/{id}/runs/current", get(current_run))
        .route("/sessions/{id}/runs/current/cancel", post(cancel_run))
        .route("/sessions/{id}/paths/{path}", get(path))
        .route("/sessions/{id}/paths/{path}/prompt", get(get_prompt).put(put_prompt))
        .route("/sessions/{id}/paths/{path}/verify", post(verify))
        .route("/sessions/{id}/locate", post(locate))
        .with_state(state)
}

async fn examples() -> Json<Value> {
    let list: Vec<Value> = EXAMPLES
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "entry": e.entry,
                "description": e.description,
                "source": e.source,
                "cfg": e.config(),
            })
        })
        .collect();
    Json(Value::Array(list))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    cfg: Option<ExtractionConfig>,
    /// Name of a built-in example to load instead of `source`.
    #[serde(default)]
    example: Option<String>,
    #[serde(default)]
    domains: Option<Domains>,
}

/// The entry function named in `cfg`, or the last function of the program.
pub fn resolve_entry(program: &Program, mut cfg: ExtractionConfig) -> ExtractionConfig {
    if cfg.entry_function.is_empty() {
        if let Some(f) = program.functions.last() {
            cfg.entry_function = f.name.clone();
        }
    }
    cfg
}

async fn create_session(State(app): State<Shared>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: CreateSession = body(&bytes)?;
    let (source, cfg, domains) = match (&req.example, req.source) {
        (Some(name), _) => {
            let ex = corpus::example(name).ok_or_else(|| ApiError::not_found(format!("unknown example {name}")))?;
            (ex.source.to_string(), req.cfg.unwrap_or_else(|| ex.config()), req.domains.unwrap_or_else(|| ex.domains()))
        }
        (None, Some(src)) => (src, req.cfg.unwrap_or_default(), req.domains.unwrap_or_default()),
        (None, None) => return Err(ApiError::bad_request("either `source` or `example` is required")),
    };
    let program = palm_core::parse(&source);
    let diagnostics: Vec<Diagnostic> = program.as_ref().err().map(Diagnostic::from).into_iter().collect();
    let config = match &program {
        Ok(p) => resolve_entry(p, cfg),
        Err(_) => cfg,
    };
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::SeqCst) + 1);
    let session = Session {
        source,
        config: config.clone(),
        domains,
        program,
        analysis: None,
        tree: None,
        history: Vec::new(),
        prompts: Arc::default(),
        run: None,
    };
    app.sessions.write().unwrap().insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok(Json(json!({ "sessionId": id, "diagnostics": diagnostics, "cfg": config })))
}

async fn export_session(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let (tree, history) = s.view().map_or((Value::Null, Vec::new()), |(t, h)| (t.to_json(), h));
    Ok(Json(json!({
        "sessionId": id,
        "source": s.source,
        "cfg": s.config,
        "domains": s.domains,
        "tree": tree,
        "history": history,
        "runActive": s.run_active(),
    })))
}

async fn delete_session(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let removed = app.sessions.write().unwrap().remove(&id);
    let s = removed.ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))?;
    if let Some(r) = &s.lock().unwrap().run {
        r.cancel.store(true, Ordering::SeqCst);
    }
    Ok(StatusCode::NO_CONTENT)
}

async fn extract(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let mut s = s.lock().unwrap();
    if s.run_active() {
        return Err(ApiError::conflict("a run is active"));
    }
    let program = match &s.program {
        Ok(p) => p.clone(),
        Err(e) => return Err(ApiError::bad_request(format!("program does not parse: {e}"))),
    };
    let analysis = Analysis::new(program, s.config.clone()).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let tree = analysis.tree.clone();
    let doc = tree.to_json();
    s.analysis = Some(Arc::new(analysis));
    s.tree = Some(tree);
    s.history.clear();
    s.run = None;
    s.prompts.lock().unwrap().clear();
    Ok(Json(doc))
}

async fn tree(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let (tree, _) = s.view().ok_or_else(|| ApiError::conflict("paths have not been extracted yet"))?;
    Ok(Json(tree.to_json()))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct StartRun {
    #[serde(flatten)]
    backend: BackendSpec,
    #[serde(default)]
    trial_limit: Option<u32>,
}

struct WorkerHooks {
    cancel: Arc<AtomicBool>,
    prompts: Arc<Mutex<HashMap<u32, String>>>,
    snapshot: Arc<Mutex<RunState>>,
}

impl RunHooks for WorkerHooks {
    fn now_millis(&self) -> u64 {
        unix_millis()
    }
    fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }
    fn prompt_override(&self, path: u32) -> Option<String> {
        self.prompts.lock().unwrap().get(&path).cloned()
    }
    fn on_progress(&mut self, state: &RunState) {
        *self.snapshot.lock().unwrap() = state.clone();
    }
}

async fn start_run(State(app): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: StartRun = body(&bytes)?;
    let session = app.session(&id)?;
    let mut s = session.lock().unwrap();
    if s.run_active() {
        return Err(ApiError::conflict("a run is already active for this session"));
    }
    let analysis = s.analysis()?;
    let tree = s.tree.clone().expect("extracted sessions have a tree");
    let mut backend = req.backend.build(&s.domains);
    let trial_limit = req.trial_limit.unwrap_or(DEFAULT_TRIAL_LIMIT).max(1);
    let state = RunState::new(&analysis, tree, backend.name(), trial_limit);
    let run_id = app.next_id.fetch_add(1, Ordering::SeqCst) + 1;
    let handle = RunHandle {
        id: run_id,
        cancel: Arc::default(),
        snapshot: Arc::new(Mutex::new(state.clone())),
        active: Arc::new(AtomicBool::new(true)),
    };
    let mut hooks =
        WorkerHooks { cancel: handle.cancel.clone(), prompts: s.prompts.clone(), snapshot: handle.snapshot.clone() };
    let active = handle.active.clone();
    s.run = Some(handle);
    drop(s);

    let worker_session = session.clone();
    tokio::task::spawn_blocking(move || {
        let mut state = state;
        generate_all(&analysis, &mut state, backend.as_mut(), &mut hooks);
        let mut s = worker_session.lock().unwrap();
        if let Some(tree) = s.tree.take() {
            s.tree = Some(merge_covered(state.tree.clone(), &tree));
        }
        s.history.extend(state.trials.iter().cloned());
        *hooks.snapshot.lock().unwrap() = state;
        active.store(false, Ordering::SeqCst);
    });
    Ok(Json(json!({ "runId": run_id.to_string() })))
}

async fn current_run(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let run = s.run.as_ref().ok_or_else(|| ApiError::not_found("no run has been started"))?;
    let mut doc = run.snapshot.lock().unwrap().to_json();
    doc["runId"] = run.id.to_string().into();
    Ok(Json(doc))
}

async fn cancel_run(State(app): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let run = s.run.as_ref().ok_or_else(|| ApiError::not_found("no run has been started"))?;
    let was_active = run.active.load(Ordering::SeqCst);
    run.cancel.store(true, Ordering::SeqCst);
    Ok(Json(json!({ "runId": run.id.to_string(), "cancelled": was_active })))
}

fn path_id(raw: &str, analysis: &Analysis) -> ApiResult<u32> {
    raw.parse::<u32>()
        .ok()
        .filter(|&p| analysis.path(p).is_some())
        .ok_or_else(|| ApiError::not_found(format!("unknown path {raw}")))
}

async fn path(State(app): State<Shared>, Path((id, raw)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let analysis = s.analysis()?;
    let p = path_id(&raw, &analysis)?;
    let variant = analysis.path(p).expect("checked");
    let (text, lines) = variant.pretty_with_lines(&analysis.program);
    let (tree, history) = s.view().expect("extracted");
    let trials: Vec<&TrialRecord> = history.iter().filter(|t| t.path_id == p).collect();
    let mut doc = variant.to_json();
    if let Some(steps) = doc["steps"].as_array_mut() {
        for (step, line) in steps.iter_mut().zip(lines) {
            step["line"] = line.map_or(Value::Null, |l| l.into());
        }
    }
    doc["text"] = text.into();
    doc["status"] = serde_json::to_value(tree.status(p)).unwrap_or(Value::Null);
    doc["leafNodeId"] = tree.leaves().get(&p).copied().into();
    doc["trials"] = serde_json::to_value(trials).unwrap_or(Value::Null);
    Ok(Json(doc))
}

async fn get_prompt(State(app): State<Shared>, Path((id, raw)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let analysis = s.analysis()?;
    let p = path_id(&raw, &analysis)?;
    let custom = s.prompts.lock().unwrap().get(&p).cloned();
    let overridden = custom.is_some();
    let prompt = custom.unwrap_or_else(|| driver::build_prompt(&analysis, analysis.path(p).expect("checked")));
    Ok(Json(json!({ "pathId": p, "prompt": prompt, "overridden": overridden })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutPrompt {
    /// `null` restores the generated prompt.
    prompt: Option<String>,
}

async fn put_prompt(
    State(app): State<Shared>,
    Path((id, raw)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult<Json<Value>> {
    let req: PutPrompt = body(&bytes)?;
    let s = app.session(&id)?;
    let s = s.lock().unwrap();
    let analysis = s.analysis()?;
    let p = path_id(&raw, &analysis)?;
    let mut prompts = s.prompts.lock().unwrap();
    let overridden = match req.prompt {
        Some(text) => {
            prompts.insert(p, text);
            true
        }
        None => {
            prompts.remove(&p);
            false
        }
    };
    Ok(Json(json!({ "pathId": p, "overridden": overridden })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TestBody {
    test_text: String,
}

fn syntax_checked(text: &str) -> ApiResult<()> {
    TestCase::parse(text).map(|_| ()).map_err(|e| ApiError::bad_request(format!("malformed test: {e}")))
}

async fn verify(
    State(app): State<Shared>,
    Path((id, raw)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult<Json<Value>> {
    let req: TestBody = body(&bytes)?;
    syntax_checked(&req.test_text)?;
    let s = app.session(&id)?;
    let mut s = s.lock().unwrap();
    let analysis = s.analysis()?;
    let p = path_id(&raw, &analysis)?;
    let mut tree = s.tree.clone().expect("extracted");
    let record = driver::verify(&analysis, &mut tree, p, &req.test_text, unix_millis())
        .map_err(|e| ApiError::not_found(e.to_string()))?;
    s.tree = Some(tree);
    s.history.push(record.clone());
    Ok(Json(serde_json::to_value(record).unwrap_or(Value::Null)))
}

async fn locate(State(app): State<Shared>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<Value>> {
    let req: TestBody = body(&bytes)?;
    syntax_checked(&req.test_text)?;
    let s = app.session(&id)?;
    let analysis = s.lock().unwrap().analysis()?;
    let test = analysis.parse_test(&req.test_text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let located = analysis.locate(&test);
    let mut doc = serde_json::to_value(&located).unwrap_or(Value::Null);
    doc["decisions"] = analysis
        .decisions(&located.exec.trace)
        .into_iter()
        .map(|(n, o)| json!({ "node": n.0, "outcome": o }))
        .collect::<Vec<_>>()
        .into();
    Ok(Json(doc))
}

/// Whether a `runs/current` snapshot shows a run that has ended.
pub fn run_finished(snapshot: &Value) -> bool {
    snapshot["status"].as_str().is_some_and(|s| s != serde_json::to_value(RunStatus::Running).unwrap())
}

pub async fn serve(addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
