//! JSON-over-HTTP front end for [`isoas_core::Engine`].
//!
//! Natural-language and SQL requests always answer `200` with a
//! [`PipelineResponse`]; understanding failures travel in its `error` field.
//! Store and saved-query management answer with a status code and an
//! `{"error": {...}}` body when the request cannot be carried out.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use isoas_core::engine::{ErrorDetail, DEFAULT_SESSION};
use isoas_core::{
    Engine, EngineConfig, EngineError, Literal, PipelineResponse, RepoError, SavedBody,
    SavedQuery, StructuredQuery,
};

pub type SharedEngine = Arc<Engine>;

/// Builds the API router. Requests not under `/api` are served from
/// `console_dir` when one is given.
pub fn router(engine: SharedEngine, console_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/query", post(query))
        .route("/api/sql", post(sql))
        .route("/api/history", get(history))
        .route("/api/saved", get(list_saved).post(save))
        .route("/api/saved/{name}", get(load_saved).delete(delete_saved))
        .route("/api/saved/{name}/run", post(run_saved))
        .route("/api/stores", get(list_stores).post(create_store))
        .route("/api/stores/{name}/attach", post(attach_store))
        .route("/api/stores/{name}/detach", post(detach_store))
        .route("/api/ingest", post(ingest))
        .with_state(engine);
    match console_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serializes a response exactly as the HTTP layer does.
pub fn to_body(response: &PipelineResponse) -> String {
    serde_json::to_string(response).expect("responses serialize")
}

struct ApiError(StatusCode, Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn status_of(e: &RepoError) -> StatusCode {
    match e {
        RepoError::UnknownStore(_) | RepoError::UnknownQuery(_) => StatusCode::NOT_FOUND,
        RepoError::NameInUse(_) | RepoError::QueryNameInUse(_) | RepoError::WrongState { .. } => {
            StatusCode::CONFLICT
        }
        RepoError::Io(_) | RepoError::Corrupt { .. } | RepoError::StageOrderViolation { .. } => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
        _ => StatusCode::BAD_REQUEST,
    }
}

fn error_body(message: String, detail: ErrorDetail) -> Value {
    let mut v = serde_json::to_value(detail).expect("details serialize");
    v["message"] = Value::String(message);
    v
}

impl From<RepoError> for ApiError {
    fn from(e: RepoError) -> Self {
        ApiError(status_of(&e), error_body(e.to_string(), ErrorDetail::from(&e)))
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Repository(r) => status_of(r),
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, error_body(e.to_string(), e.detail()))
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, json!({ "kind": "BadRequest", "message": message.into() }))
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn session_or_default(session: &Option<String>) -> &str {
    session.as_deref().unwrap_or(DEFAULT_SESSION)
}

#[derive(Deserialize)]
struct QueryRequest {
    text: String,
    session: Option<String>,
    store: Option<String>,
}

async fn query(State(engine): State<SharedEngine>, Json(req): Json<QueryRequest>) -> Response {
    let resp = engine.query(&req.text, session_or_default(&req.session), req.store.as_deref());
    pipeline(resp)
}

fn pipeline(resp: PipelineResponse) -> Response {
    (
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        to_body(&resp),
    )
        .into_response()
}

#[derive(Deserialize)]
struct SqlRequest {
    sql: String,
    session: Option<String>,
    store: Option<String>,
}

async fn sql(State(engine): State<SharedEngine>, Json(req): Json<SqlRequest>) -> Response {
    pipeline(engine.sql(&req.sql, session_or_default(&req.session), req.store.as_deref()))
}

#[derive(Deserialize)]
struct HistoryParams {
    session: Option<String>,
}

async fn history(
    State(engine): State<SharedEngine>,
    Query(params): Query<HistoryParams>,
) -> ApiResult<Vec<isoas_core::LedgerEntry>> {
    Ok(Json(engine.repository().history(session_or_default(&params.session))))
}

async fn list_saved(State(engine): State<SharedEngine>) -> ApiResult<Vec<SavedQuery>> {
    Ok(Json(engine.repository().list_queries()))
}

/// Either an explicit body (`kind` + `body`) or natural-language `text`
/// compiled against `store`.
#[derive(Deserialize)]
struct SaveRequest {
    name: String,
    kind: Option<String>,
    body: Option<Value>,
    text: Option<String>,
    store: Option<String>,
    #[serde(default)]
    overwrite: bool,
}

async fn save(
    State(engine): State<SharedEngine>,
    Json(req): Json<SaveRequest>,
) -> Result<(StatusCode, Json<SavedQuery>), ApiError> {
    let body = match (req.text, req.kind.as_deref(), req.body) {
        (Some(text), None, None) => {
            let store = match req.store {
                Some(s) => s,
                None => engine.default_store()?,
            };
            let q = engine
                .compile(&text, &store)
                .map_err(|e| ApiError::from(EngineError::from(e)))?;
            SavedBody::Ir(q)
        }
        (None, Some("sql"), Some(Value::String(sql))) => SavedBody::Sql(sql),
        (None, Some("ir"), Some(ir)) => {
            let q: StructuredQuery = serde_json::from_value(ir)
                .map_err(|e| bad_request(format!("invalid query body: {e}")))?;
            SavedBody::Ir(q)
        }
        _ => {
            return Err(bad_request(
                "give either `text`, or `kind` (`ir` or `sql`) with a matching `body`",
            ))
        }
    };
    let saved = engine
        .repository()
        .save_query(SavedQuery::new(req.name, body), req.overwrite)?;
    Ok((StatusCode::CREATED, Json(saved)))
}

async fn load_saved(
    State(engine): State<SharedEngine>,
    Path(name): Path<String>,
) -> ApiResult<SavedQuery> {
    Ok(Json(engine.repository().load_query(&name)?))
}

async fn delete_saved(
    State(engine): State<SharedEngine>,
    Path(name): Path<String>,
) -> ApiResult<Value> {
    engine.repository().delete_query(&name)?;
    Ok(Json(json!({ "deleted": name })))
}

#[derive(Deserialize, Default)]
struct RunRequest {
    #[serde(default)]
    bindings: Vec<Value>,
    session: Option<String>,
    store: Option<String>,
}

fn literal(value: &Value) -> Result<Literal, ApiError> {
    match value {
        Value::Number(n) => Ok(Literal::numeric(n.to_string())),
        Value::String(s) => Ok(Literal::infer(s)),
        other => Err(bad_request(format!("binding {other} must be a number or string"))),
    }
}

async fn run_saved(
    State(engine): State<SharedEngine>,
    Path(name): Path<String>,
    body: Option<Json<RunRequest>>,
) -> Result<Response, ApiError> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let bindings = req.bindings.iter().map(literal).collect::<Result<Vec<_>, _>>()?;
    Ok(pipeline(engine.saved(
        &name,
        &bindings,
        session_or_default(&req.session),
        req.store.as_deref(),
    )))
}

async fn list_stores(State(engine): State<SharedEngine>) -> ApiResult<Vec<isoas_core::StoreInfo>> {
    Ok(Json(engine.repository().list_stores()))
}

#[derive(Deserialize)]
struct CreateStore {
    name: String,
}

async fn create_store(
    State(engine): State<SharedEngine>,
    Json(req): Json<CreateStore>,
) -> Result<(StatusCode, Json<isoas_core::StoreInfo>), ApiError> {
    Ok((StatusCode::CREATED, Json(engine.repository().create_store(&req.name)?)))
}

async fn attach_store(
    State(engine): State<SharedEngine>,
    Path(name): Path<String>,
) -> ApiResult<isoas_core::StoreInfo> {
    Ok(Json(engine.repository().attach_store(&name)?))
}

async fn detach_store(
    State(engine): State<SharedEngine>,
    Path(name): Path<String>,
) -> ApiResult<isoas_core::StoreInfo> {
    Ok(Json(engine.repository().detach_store(&name)?))
}

#[derive(Deserialize)]
struct IngestRequest {
    store: String,
    csv: String,
}

async fn ingest(State(engine): State<SharedEngine>, Json(req): Json<IngestRequest>) -> ApiResult<Value> {
    let n = engine.repository().ingest(&req.store, &req.csv)?;
    Ok(Json(json!({ "store": req.store, "ingested": n })))
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub engine: EngineConfig,
    /// Static files for the web console.
    pub console_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ServeError {
    Engine(EngineError),
    Bind { addr: SocketAddr, source: std::io::Error },
    Io(std::io::Error),
}

impl std::fmt::Display for ServeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServeError::Engine(e) => write!(f, "cannot open engine: {e}"),
            ServeError::Bind { addr, source } => write!(f, "cannot listen on {addr}: {source}"),
            ServeError::Io(e) => write!(f, "server failed: {e}"),
        }
    }
}

impl std::error::Error for ServeError {}

/// Serves the API on an already bound listener until the task is dropped.
pub async fn serve(
    listener: tokio::net::TcpListener,
    engine: SharedEngine,
    console_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    axum::serve(listener, router(engine, console_dir)).await
}

/// Opens the engine, binds `config.addr` and serves until the process ends.
/// `on_ready` receives the bound address.
pub fn serve_blocking(config: ServerConfig, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let engine = Arc::new(Engine::open(&config.engine).map_err(ServeError::Engine)?);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(ServeError::Io)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.addr)
            .await
            .map_err(|source| ServeError::Bind {
                addr: config.addr,
                source,
            })?;
        on_ready(listener.local_addr().map_err(ServeError::Io)?);
        serve(listener, engine, config.console_dir)
            .await
            .map_err(ServeError::Io)
    })
}
