//! JSON-over-HTTP facade for interactive clients.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/projects` | create and open `{name, source}` |
//! | GET | `/projects` | list projects under the root |
//! | POST | `/projects/{id}/open` | open, returns `session_id` |
//! | POST | `/projects/{id}/save` | rewrite project files |
//! | POST | `/projects/{id}/refresh` | reload source (optional `{source}`) and replay |
//! | GET | `/sessions/{sid}/facets` | facet summaries in display order |
//! | GET | `/sessions/{sid}/facets/{f}/values` | distinct values with counts |
//! | GET | `/sessions/{sid}/rows?filter=&offset=&limit=` | filtered preview |
//! | POST | `/sessions/{sid}/transform` | apply one transformation |
//! | POST | `/sessions/{sid}/undo`, `/redo` | |
//! | GET | `/sessions/{sid}/log` | log records with outcomes |
//! | GET | `/sessions/{sid}/export?format=ntriples\|turtle\|csv\|tsv` | |
//! | DELETE | `/sessions/{sid}` | close, releasing the project lock |
//! | GET, POST, DELETE | `/favourites` | saved SPARQL sources |
//! | POST | `/sparql/preview` | first rows of a SELECT query |
//! | POST | `/intervals/preview` | boundaries and labels of a chain |
//! | POST | `/expressions/parse` | syntax check of a derive expression |
//!
//! Errors are `{"error": <code>, "detail": <text>}` with status 404 for
//! unknown sessions or projects, 409 for lock conflicts and 422 for
//! rejected requests.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::expr::parse_expression;
use crate::intervals::{IntervalLayout, IntervalSpecChain};
use crate::model::{Cell, Dataset};
use crate::project::{LoadContext, ProjectError, ProjectSession, SourceDescriptor, PROJECT_FILE};
use crate::rdf::{export_ntriples, export_turtle, ExportOptions};
use crate::sparql::{execute_select, Favourite, FavouritesError, FavouritesStore, SparqlError, SparqlSource};
use crate::tabular::{serialize_table, Delimiter};
use crate::transform::{ApplyOutcome, EngineError, LogEntry, RowCondition, Transformation};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub root: PathBuf,
    pub sparql_timeout: Duration,
    pub idle_timeout: Duration,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { status, code: code.into(), detail: detail.into() }
    }

    fn unprocessable(code: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, detail)
    }

    fn not_found(code: &str, what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, format!("no such {}: {what}", code.trim_start_matches("Unknown").to_lowercase()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "detail": self.detail}))).into_response()
    }
}

/// The variant name of an error enum, taken from its `Debug` form.
fn variant_name(e: &impl std::fmt::Debug) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::unprocessable(variant_name(&e), e.to_string())
    }
}

impl From<SparqlError> for ApiError {
    fn from(e: SparqlError) -> Self {
        let status = match e {
            SparqlError::NetworkError(_) | SparqlError::HttpStatus(_) | SparqlError::MalformedResults(_) => {
                StatusCode::BAD_GATEWAY
            }
            SparqlError::Timeout => StatusCode::GATEWAY_TIMEOUT,
            SparqlError::NotSelectQuery | SparqlError::InvalidEndpoint(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, variant_name(&e), e.to_string())
    }
}

impl From<FavouritesError> for ApiError {
    fn from(e: FavouritesError) -> Self {
        let status = match e {
            FavouritesError::DuplicateLabel(_) => StatusCode::CONFLICT,
            FavouritesError::UnknownLabel(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, variant_name(&e), e.to_string())
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        match e {
            ProjectError::Engine(e) => e.into(),
            ProjectError::Sparql(e) => e.into(),
            ProjectError::Favourites(e) => e.into(),
            ProjectError::Locked(_) | ProjectError::AlreadyExists(_) => {
                ApiError::new(StatusCode::CONFLICT, variant_name(&e), e.to_string())
            }
            ProjectError::Io(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", e.to_string()),
            other => ApiError::unprocessable(variant_name(&other), other.to_string()),
        }
    }
}

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

struct Slot {
    project: String,
    session: RwLock<ProjectSession>,
    last_used: Mutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }
}

pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    favourites: Mutex<()>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self { config, sessions: Mutex::new(HashMap::new()), favourites: Mutex::new(()) }
    }

    fn ctx(&self) -> LoadContext {
        LoadContext { sparql_timeout: self.config.sparql_timeout }
    }

    fn slot(&self, sid: &str) -> ApiResult<Arc<Slot>> {
        let slot = self.sessions.lock().unwrap().get(sid).cloned().ok_or_else(|| ApiError::not_found("UnknownSession", sid))?;
        slot.touch();
        Ok(slot)
    }

    fn slot_for_project(&self, name: &str) -> Option<(String, Arc<Slot>)> {
        self.sessions.lock().unwrap().iter().find(|(_, s)| s.project == name).map(|(k, s)| (k.clone(), Arc::clone(s)))
    }

    fn register(&self, ps: ProjectSession) -> (String, Arc<Slot>) {
        let sid = uuid::Uuid::new_v4().simple().to_string();
        let slot = Arc::new(Slot {
            project: ps.project().name.clone(),
            session: RwLock::new(ps),
            last_used: Mutex::new(Instant::now()),
        });
        self.sessions.lock().unwrap().insert(sid.clone(), Arc::clone(&slot));
        (sid, slot)
    }

    /// Drops sessions idle for longer than the configured timeout.
    pub fn sweep(&self) -> usize {
        let limit = self.config.idle_timeout;
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        map.retain(|_, s| s.last_used.lock().unwrap().elapsed() < limit);
        before - map.len()
    }

    fn favourites_path(&self) -> PathBuf {
        self.config.root.join("favourites.json")
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable("InvalidBody", e.to_string()))
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Present(s) => Value::String(s.clone()),
        Cell::Missing => Value::Null,
    }
}

/// Facet summaries in display order.
pub fn facet_summaries(d: &Dataset) -> Value {
    let out: Vec<Value> = d
        .display_order()
        .into_iter()
        .map(|i| {
            let f = &d.facets[i];
            let tree: Option<Vec<Value>> = f.term_tree().map(|t| {
                t.nodes().map(|(label, node)| json!({"label": label, "parent": node.parent, "kind": node.kind})).collect()
            });
            json!({
                "name": f.name,
                "type": f.ftype,
                "visible": f.visible,
                "order": f.order_index,
                "identifier": d.identifier_facet.as_deref() == Some(f.name.as_str()),
                "derivation": f.derivation,
                "intervals": f.intervals.as_ref().map(|l| json!({"chain": l.chain, "boundaries": l.levels})),
                "tree": tree,
            })
        })
        .collect();
    Value::Array(out)
}

fn entry_json(e: &LogEntry, outcome: Option<&ApplyOutcome>) -> Value {
    let mut v = serde_json::to_value(e).expect("log entries serialize");
    if let (Some(o), Value::Object(map)) = (outcome, &mut v) {
        map.insert("outcome".into(), serde_json::to_value(o).expect("outcomes serialize"));
    }
    v
}

#[derive(Deserialize)]
struct CreateBody {
    name: String,
    source: SourceDescriptor,
}

async fn create_project(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let body: CreateBody = parse_body(&body)?;
    blocking(move || {
        let source = body.source.anchored(&st.config.root);
        let ps = ProjectSession::create(&st.config.root, &body.name, source, st.ctx())?;
        let warnings = ps.warnings().to_vec();
        let facets = facet_summaries(ps.dataset());
        let (sid, _) = st.register(ps);
        Ok((StatusCode::CREATED, Json(json!({"session_id": sid, "project": body.name, "warnings": warnings, "facets": facets}))))
    })
    .await
}

async fn list_projects(State(st): State<Arc<AppState>>) -> ApiResult {
    blocking(move || {
        let mut names = Vec::new();
        if let Ok(entries) = std::fs::read_dir(&st.config.root) {
            for e in entries.flatten() {
                if e.path().join(PROJECT_FILE).is_file() {
                    names.push(e.file_name().to_string_lossy().into_owned());
                }
            }
        }
        names.sort();
        let list: Vec<Value> = names
            .into_iter()
            .map(|n| {
                let sid = st.slot_for_project(&n).map(|(sid, _)| sid);
                json!({"name": n, "open": sid.is_some(), "session_id": sid})
            })
            .collect();
        Ok(Json(Value::Array(list)))
    })
    .await
}

fn project_dir(st: &AppState, id: &str) -> ApiResult<PathBuf> {
    crate::project::validate_name(id).map_err(|_| ApiError::not_found("UnknownProject", id))?;
    let dir = st.config.root.join(id);
    if !dir.join(PROJECT_FILE).is_file() {
        return Err(ApiError::not_found("UnknownProject", id));
    }
    Ok(dir)
}

fn outcomes_json(log: &[LogEntry], outcomes: &[ApplyOutcome]) -> Vec<Value> {
    log.iter().zip(outcomes).map(|(e, o)| entry_json(e, Some(o))).collect()
}

async fn open_project_handler(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let dir = project_dir(&st, &id)?;
        let (sid, slot) = match st.slot_for_project(&id) {
            Some(found) => found,
            None => st.register(ProjectSession::open(&dir, st.ctx())?),
        };
        let ps = slot.session.read().unwrap();
        let session = ps.session();
        Ok(Json(json!({
            "session_id": sid,
            "project": id,
            "warnings": ps.warnings(),
            "log": outcomes_json(session.log(), session.outcomes()),
            "facets": facet_summaries(ps.dataset()),
        })))
    })
    .await
}

fn open_slot(st: &AppState, id: &str) -> ApiResult<(String, Arc<Slot>)> {
    project_dir(st, id)?;
    let found = st.slot_for_project(id).ok_or_else(|| {
        ApiError::unprocessable("ProjectNotOpen", format!("project {id:?} has no open session"))
    })?;
    found.1.touch();
    Ok(found)
}

async fn save_project_handler(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    blocking(move || {
        let (sid, slot) = open_slot(&st, &id)?;
        slot.session.read().unwrap().save()?;
        Ok(Json(json!({"session_id": sid, "saved": true})))
    })
    .await
}

#[derive(Deserialize, Default)]
struct RefreshBody {
    #[serde(default)]
    source: Option<SourceDescriptor>,
}

async fn refresh_project(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: RefreshBody = if body.iter().all(u8::is_ascii_whitespace) { RefreshBody::default() } else { parse_body(&body)? };
    blocking(move || {
        let (sid, slot) = open_slot(&st, &id)?;
        let mut ps = slot.session.write().unwrap();
        let source = body.source.map(|s| s.anchored(&st.config.root));
        let outcomes = ps.refresh(source)?;
        Ok(Json(json!({
            "session_id": sid,
            "warnings": ps.warnings(),
            "outcomes": outcomes_json(ps.session().log(), &outcomes),
            "facets": facet_summaries(ps.dataset()),
        })))
    })
    .await
}

async fn get_facets(State(st): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult {
    blocking(move || {
        let slot = st.slot(&sid)?;
        let ps = slot.session.read().unwrap();
        Ok(Json(facet_summaries(ps.dataset())))
    })
    .await
}

async fn get_values(State(st): State<Arc<AppState>>, Path((sid, facet)): Path<(String, String)>) -> ApiResult {
    blocking(move || {
        let slot = st.slot(&sid)?;
        let ps = slot.session.read().unwrap();
        let dv = ps.dataset().distinct_values(&facet).map_err(|_| ApiError::not_found("UnknownFacet", &facet))?;
        Ok(Json(json!({"facet": facet, "values": dv.values, "missing": dv.missing})))
    })
    .await
}

#[derive(Deserialize)]
struct RowsQuery {
    filter: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

pub const MAX_PREVIEW_ROWS: usize = 1000;

async fn get_rows(State(st): State<Arc<AppState>>, Path(sid): Path<String>, Query(q): Query<RowsQuery>) -> ApiResult {
    let cond: Option<RowCondition> = match q.filter.as_deref().filter(|f| !f.trim().is_empty()) {
        Some(f) => Some(parse_body(f.as_bytes())?),
        None => None,
    };
    blocking(move || {
        let slot = st.slot(&sid)?;
        let ps = slot.session.read().unwrap();
        let d = ps.dataset();
        let bound = cond.map(|c| c.bind(d)).transpose()?;
        let order = d.display_order();
        let matched: Vec<usize> = (0..d.rows.len()).filter(|&i| bound.as_ref().is_none_or(|b| b.matches(&d.rows[i]))).collect();
        let offset = q.offset.unwrap_or(0);
        let limit = q.limit.unwrap_or(50).min(MAX_PREVIEW_ROWS);
        let rows: Vec<Value> = matched
            .iter()
            .skip(offset)
            .take(limit)
            .map(|&i| json!({"index": i, "cells": order.iter().map(|&c| cell_json(&d.rows[i][c])).collect::<Vec<_>>()}))
            .collect();
        let header: Vec<&str> = order.iter().map(|&i| d.facets[i].name.as_str()).collect();
        Ok(Json(json!({"total": d.rows.len(), "matched": matched.len(), "offset": offset, "header": header, "rows": rows})))
    })
    .await
}

async fn post_transform(State(st): State<Arc<AppState>>, Path(sid): Path<String>, body: Bytes) -> ApiResult {
    let t: Transformation = parse_body(&body)?;
    blocking(move || {
        let slot = st.slot(&sid)?;
        let mut ps = slot.session.write().unwrap();
        let entry = ps.apply(t)?;
        Ok(Json(json!({
            "entry": entry_json(&entry, None),
            "outcome": ApplyOutcome::Applied,
            "facets": facet_summaries(ps.dataset()),
        })))
    })
    .await
}

async fn post_undo(State(st): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult {
    blocking(move || {
        let slot = st.slot(&sid)?;
        let mut ps = slot.session.write().unwrap();
        let entry = ps.undo()?;
        Ok(Json(json!({"undone": entry_json(&entry, None), "facets": facet_summaries(ps.dataset())})))
    })
    .await
}

async fn post_redo(State(st): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult {
    blocking(move || {
        let slot = st.slot(&sid)?;
        let mut ps = slot.session.write().unwrap();
        let (entry, outcome) = ps.redo()?;
        Ok(Json(json!({
            "entry": entry_json(&entry, None),
            "outcome": outcome,
            "facets": facet_summaries(ps.dataset()),
        })))
    })
    .await
}

async fn get_log(State(st): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult {
    blocking(move || {
        let slot = st.slot(&sid)?;
        let ps = slot.session.read().unwrap();
        let s = ps.session();
        Ok(Json(json!({
            "log": outcomes_json(s.log(), s.outcomes()),
            "redo": s.redo_stack().iter().rev().map(|e| entry_json(e, None)).collect::<Vec<_>>(),
        })))
    })
    .await
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
    base: Option<String>,
}

/// Serializes a dataset in one of the export formats, returning the bytes
/// and their media type.
pub fn export_bytes(d: &Dataset, format: &str, base: Option<&str>) -> Result<(Vec<u8>, &'static str), String> {
    let opts = base.map_or_else(ExportOptions::default, |b| ExportOptions { base: b.to_string() });
    match format {
        "ntriples" => export_ntriples(d, &opts).map(|b| (b, "application/n-triples")).map_err(|e| e.to_string()),
        "turtle" => export_turtle(d, &opts).map(|b| (b, "text/turtle")).map_err(|e| e.to_string()),
        "csv" => Ok((serialize_table(d, Delimiter::Comma), "text/csv")),
        "tsv" => Ok((serialize_table(d, Delimiter::Tab), "text/tab-separated-values")),
        other => Err(format!("unknown export format {other:?}")),
    }
}

async fn get_export(State(st): State<Arc<AppState>>, Path(sid): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    blocking(move || {
        let slot = st.slot(&sid)?;
        let ps = slot.session.read().unwrap();
        let format = q.format.as_deref().unwrap_or("ntriples");
        let (bytes, media) =
            export_bytes(ps.dataset(), format, q.base.as_deref()).map_err(|e| ApiError::unprocessable("ExportFailed", e))?;
        Ok(([(header::CONTENT_TYPE, format!("{media}; charset=utf-8"))], bytes).into_response())
    })
    .await
}

async fn close_session(State(st): State<Arc<AppState>>, Path(sid): Path<String>) -> ApiResult {
    blocking(move || {
        let removed = st.sessions.lock().unwrap().remove(&sid);
        match removed {
            Some(_) => Ok(Json(json!({"closed": sid}))),
            None => Err(ApiError::not_found("UnknownSession", &sid)),
        }
    })
    .await
}

async fn list_favourites(State(st): State<Arc<AppState>>) -> ApiResult {
    blocking(move || {
        let _guard = st.favourites.lock().unwrap();
        let store = FavouritesStore::load(&st.favourites_path())?;
        Ok(Json(serde_json::to_value(store.list()).expect("favourites serialize")))
    })
    .await
}

async fn add_favourite(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let fav: Favourite = parse_body(&body)?;
    fav.source.validate()?;
    blocking(move || {
        let _guard = st.favourites.lock().unwrap();
        let path = st.favourites_path();
        let mut store = FavouritesStore::load(&path)?;
        store.add(fav)?;
        std::fs::create_dir_all(&st.config.root).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", e.to_string()))?;
        store.save(&path)?;
        Ok((StatusCode::CREATED, Json(serde_json::to_value(store.list()).expect("favourites serialize"))))
    })
    .await
}

#[derive(Deserialize)]
struct LabelQuery {
    label: String,
}

async fn remove_favourite(State(st): State<Arc<AppState>>, Query(q): Query<LabelQuery>) -> ApiResult {
    remove_favourite_label(st, q.label).await
}

async fn remove_favourite_path(State(st): State<Arc<AppState>>, Path(label): Path<String>) -> ApiResult {
    remove_favourite_label(st, label).await
}

async fn remove_favourite_label(st: Arc<AppState>, label: String) -> ApiResult {
    blocking(move || {
        let _guard = st.favourites.lock().unwrap();
        let path = st.favourites_path();
        let mut store = FavouritesStore::load(&path)?;
        store.remove(&label)?;
        store.save(&path)?;
        Ok(Json(serde_json::to_value(store.list()).expect("favourites serialize")))
    })
    .await
}

#[derive(Deserialize)]
struct SparqlPreviewBody {
    endpoint_url: String,
    query: String,
    #[serde(default)]
    limit: Option<usize>,
}

async fn sparql_preview(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let body: SparqlPreviewBody = parse_body(&body)?;
    let src = SparqlSource::new(body.endpoint_url, body.query)?;
    blocking(move || {
        let table = execute_select(&src, st.config.sparql_timeout)?;
        let limit = body.limit.unwrap_or(20).min(MAX_PREVIEW_ROWS);
        let rows: Vec<Vec<Value>> = table
            .rows
            .iter()
            .take(limit)
            .map(|r| r.iter().map(|c| if c.is_empty() { Value::Null } else { Value::String(c.clone()) }).collect())
            .collect();
        Ok(Json(json!({"header": table.header, "total": table.rows.len(), "rows": rows})))
    })
    .await
}

#[derive(Deserialize)]
struct IntervalPreviewBody {
    chain: IntervalSpecChain,
}

async fn intervals_preview(body: Bytes) -> ApiResult {
    let body: IntervalPreviewBody = parse_body(&body)?;
    let layout = IntervalLayout::build(&body.chain).map_err(EngineError::from)?;
    let levels: Vec<Value> = (0..layout.levels.len())
        .map(|l| json!({"boundaries": layout.levels[l], "labels": layout.terms(l).into_iter().map(|t| t.label).collect::<Vec<_>>()}))
        .collect();
    Ok(Json(json!({"levels": levels})))
}

#[derive(Deserialize)]
struct ParseBody {
    expression: String,
}

async fn expressions_parse(body: Bytes) -> ApiResult {
    let body: ParseBody = parse_body(&body)?;
    match parse_expression(&body.expression) {
        Ok(e) => Ok(Json(json!({"ok": true, "normalized": e.to_string(), "facet_refs": e.facet_refs()}))),
        Err(e) => Err(ApiError::unprocessable("Syntax", e.to_string())),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}/open", post(open_project_handler))
        .route("/projects/{id}/save", post(save_project_handler))
        .route("/projects/{id}/refresh", post(refresh_project))
        .route("/sessions/{sid}", delete(close_session))
        .route("/sessions/{sid}/facets", get(get_facets))
        .route("/sessions/{sid}/facets/{facet}/values", get(get_values))
        .route("/sessions/{sid}/rows", get(get_rows))
        .route("/sessions/{sid}/transform", post(post_transform))
        .route("/sessions/{sid}/undo", post(post_undo))
        .route("/sessions/{sid}/redo", post(post_redo))
        .route("/sessions/{sid}/log", get(get_log))
        .route("/sessions/{sid}/export", get(get_export))
        .route("/favourites", get(list_favourites).post(add_favourite).delete(remove_favourite))
        .route("/favourites/{label}", delete(remove_favourite_path))
        .route("/sparql/preview", post(sparql_preview))
        .route("/intervals/preview", post(intervals_preview))
        .route("/expressions/parse", post(expressions_parse))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    config: ServiceConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(config));
    let sweeper = {
        let state = Arc::clone(&state);
        let period = (state.config.idle_timeout / 4).clamp(Duration::from_millis(50), Duration::from_secs(30));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let st = Arc::clone(&state);
                let _ = tokio::task::spawn_blocking(move || st.sweep()).await;
            }
        })
    };
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}

/// A service running on its own runtime thread; stops when dropped.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn(config: ServiceConfig) -> std::io::Result<ServiceHandle> {
    let std_listener = std::net::TcpListener::bind(config.listen)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener)?;
            serve(listener, config, async move {
                let _ = rx.await;
            })
            .await
        })
    });
    Ok(ServiceHandle { addr, stop: Some(tx), thread: Some(thread) })
}
