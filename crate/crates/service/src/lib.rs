//! HTTP/JSON API over analyst sessions.
//!
//! Sessions live in memory keyed by id and are written through to the
//! store after every mutation. Mutations of one session are serialized by a
//! per-session lock; the tag store has a single writer.

mod error;

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock as SyncRwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use mailsleuth_core::analytics::{Granularity, TimeBin};
use mailsleuth_core::api::{
    self, ClusterMembers, Envelope, FilterRequest, ResultSummary, TagUpdate, TaggedEntity,
};
use mailsleuth_core::cluster::{ClusterSummary, DEFAULT_RESTARTS};
use mailsleuth_core::entities::{TagCount, TagStore};
use mailsleuth_core::graph::GraphView;
use mailsleuth_core::ingest::{self, DatasetHandle, SchemaMap, SourceFormat};
use mailsleuth_core::query::{ActionLog, FilterId};
use mailsleuth_core::session::{replay, Session, SessionState};
use mailsleuth_core::store::{Dataset, Store};
use mailsleuth_core::{CorrespondentStat, Error};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::CorsLayer;

pub use error::{status_for, ApiError};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_CLUSTER_DOC_CAP: usize = 5000;

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    pub cluster_doc_cap: usize,
    pub restarts: usize,
}

impl Config {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Config {
            data_dir: data_dir.into(),
            cluster_doc_cap: DEFAULT_CLUSTER_DOC_CAP,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

pub struct AppState {
    store: Store,
    config: Config,
    datasets: SyncRwLock<HashMap<String, Arc<Dataset>>>,
    sessions: SyncRwLock<HashMap<String, Arc<Mutex<Session>>>>,
    tags: RwLock<TagStore>,
}

impl AppState {
    pub fn open(config: Config) -> mailsleuth_core::Result<Self> {
        let store = Store::open(&config.data_dir)?;
        let tags = store.load_tag_store()?;
        Ok(AppState {
            store,
            config,
            datasets: SyncRwLock::default(),
            sessions: SyncRwLock::default(),
            tags: RwLock::new(tags),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn dataset(&self, id: &str) -> mailsleuth_core::Result<Arc<Dataset>> {
        if let Some(ds) = self.datasets.read().expect("lock poisoned").get(id) {
            return Ok(ds.clone());
        }
        let ds = Arc::new(self.store.load_dataset(id)?);
        self.datasets
            .write()
            .expect("lock poisoned")
            .insert(id.to_string(), ds.clone());
        Ok(ds)
    }

    fn session(&self, id: &str) -> mailsleuth_core::Result<Arc<Mutex<Session>>> {
        if let Some(s) = self.sessions.read().expect("lock poisoned").get(id) {
            return Ok(s.clone());
        }
        let state = self.store.load_session(id)?;
        let dataset = self.dataset(&state.dataset_id)?;
        let session = Arc::new(Mutex::new(Session::restore(state, dataset)?));
        let mut sessions = self.sessions.write().expect("lock poisoned");
        Ok(sessions.entry(id.to_string()).or_insert(session).clone())
    }

    fn register(&self, session: Session) -> mailsleuth_core::Result<SessionState> {
        self.store.save_session(session.state())?;
        let state = session.state().clone();
        self.sessions
            .write()
            .expect("lock poisoned")
            .insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        Ok(state)
    }

    /// Applies `f` to a copy of the tag store, persists the copy, then
    /// publishes it.
    async fn update_tags<T>(
        &self,
        f: impl FnOnce(&mut TagStore) -> mailsleuth_core::Result<T>,
    ) -> mailsleuth_core::Result<(T, TagStore)> {
        let mut guard = self.tags.write().await;
        let mut next = guard.clone();
        let out = f(&mut next)?;
        if next != *guard {
            self.store.persist_tag_store(&next)?;
            *guard = next.clone();
        }
        Ok((out, next))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/filters", post(add_filter))
        .route("/sessions/{id}/filters/{fid}", delete(remove_filter))
        .route("/sessions/{id}/summary", get(summary))
        .route("/sessions/{id}/results", get(results))
        .route("/sessions/{id}/correspondents", get(correspondents))
        .route("/sessions/{id}/timeline", get(timeline))
        .route("/sessions/{id}/entities", get(entities))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/graph/remove", post(graph_remove))
        .route("/sessions/{id}/graph/undo", post(graph_undo))
        .route("/sessions/{id}/cluster", post(cluster).get(cluster_summary))
        .route(
            "/sessions/{id}/cluster/{index}/members",
            get(cluster_members),
        )
        .route("/sessions/{id}/actions", get(actions))
        .route("/tags", post(assign_tag))
        .route("/tags/distribution", get(tag_distribution))
        .route("/replay", post(replay_log))
        .layer(DefaultBodyLimit::max(1 << 30))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(config: Config, port: u16) -> std::io::Result<()> {
    let state = AppState::open(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], port))).await?;
    axum::serve(listener, router(Arc::new(state))).await
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn params<T>(query: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    query
        .map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn upload_dataset(
    State(app): State<Arc<AppState>>,
    mut form: Multipart,
) -> ApiResult<DatasetHandle> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request(e.body_text());
    let mut file: Option<(Option<String>, Vec<u8>)> = None;
    let mut format = None;
    let mut label = None;
    let mut schema_pairs = Vec::new();
    let mut pool: Option<Vec<String>> = None;
    let mut seed = 0u64;
    while let Some(field) = form.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "file" => {
                let filename = field.file_name().map(str::to_string);
                file = Some((filename, field.bytes().await.map_err(bad)?.to_vec()));
            }
            "format" => format = Some(field.text().await.map_err(bad)?.parse::<SourceFormat>()?),
            "label" => label = Some(field.text().await.map_err(bad)?),
            "schema" => schema_pairs.extend(
                field
                    .text()
                    .await
                    .map_err(bad)?
                    .split([',', '\n'])
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string),
            ),
            "pool" => {
                pool = Some(
                    field
                        .text()
                        .await
                        .map_err(bad)?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_string)
                        .collect(),
                )
            }
            "seed" => {
                seed = field
                    .text()
                    .await
                    .map_err(bad)?
                    .trim()
                    .parse()
                    .map_err(|_| ApiError::bad_request("seed must be an unsigned integer"))?
            }
            other => {
                return Err(ApiError::bad_request(format!(
                    "unexpected form field `{other}`"
                )))
            }
        }
    }
    let (filename, bytes) = file.ok_or_else(|| ApiError::bad_request("missing `file` field"))?;
    let format = format.ok_or_else(|| ApiError::bad_request("missing `format` field"))?;
    let schema = if schema_pairs.is_empty() {
        None
    } else {
        let refs: Vec<&str> = schema_pairs.iter().map(String::as_str).collect();
        Some(SchemaMap::parse_pairs(&refs)?)
    };
    let outcome = ingest::parse_stream(Cursor::new(bytes), format, schema.as_ref())?;
    let label = label.or(filename).unwrap_or_else(|| "upload".into());
    let synthesize = pool.map(|p| (p, seed));
    Ok(Json(ingest::ingest_records(
        &app.store,
        outcome.records,
        &label,
        synthesize.as_ref(),
    )?))
}

async fn list_datasets(State(app): State<Arc<AppState>>) -> ApiResult<Vec<DatasetHandle>> {
    Ok(Json(app.store.list_datasets()?))
}

#[derive(Debug, Deserialize)]
struct NewSession {
    dataset_id: String,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    payload: Result<Json<NewSession>, JsonRejection>,
) -> ApiResult<SessionState> {
    let req = body(payload)?;
    let dataset = app.dataset(&req.dataset_id)?;
    Ok(Json(app.register(Session::new(dataset))?))
}

async fn get_session(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<SessionState> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(s.state().clone()))
}

async fn add_filter(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<FilterRequest>, JsonRejection>,
) -> ApiResult<Envelope<ResultSummary>> {
    let predicate = body(payload)?.to_predicate()?;
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    s.add_filter(predicate)?;
    app.store.save_session(s.state())?;
    Ok(Json(api::summary(&s)))
}

async fn remove_filter(
    State(app): State<Arc<AppState>>,
    Path((id, fid)): Path<(String, String)>,
) -> ApiResult<Envelope<ResultSummary>> {
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    s.remove_filter(&FilterId(fid))?;
    app.store.save_session(s.state())?;
    Ok(Json(api::summary(&s)))
}

async fn summary(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Envelope<ResultSummary>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::summary(&s)))
}

#[derive(Debug, Deserialize)]
struct PageParams {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn results(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<PageParams>, QueryRejection>,
) -> ApiResult<Envelope<api::ResultsPage>> {
    let page = params(query)?;
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::results_page(
        &s,
        page.offset.unwrap_or(0),
        page.limit.unwrap_or(api::DEFAULT_PAGE_SIZE),
    )))
}

async fn correspondents(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Envelope<Vec<CorrespondentStat>>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::correspondents(&s)))
}

#[derive(Debug, Deserialize)]
struct TimelineParams {
    granularity: Option<String>,
}

async fn timeline(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<TimelineParams>, QueryRejection>,
) -> ApiResult<Envelope<Vec<TimeBin>>> {
    let granularity = match params(query)?.granularity {
        Some(g) => g.parse::<Granularity>()?,
        None => Granularity::Day,
    };
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::timeline(&s, granularity)))
}

#[derive(Debug, Deserialize)]
struct EntityParams {
    k: Option<usize>,
}

async fn entities(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<EntityParams>, QueryRejection>,
) -> ApiResult<Envelope<Vec<TaggedEntity>>> {
    let k = params(query)?.k.unwrap_or(api::DEFAULT_ENTITY_COUNT);
    let session = app.session(&id)?;
    let s = session.lock().await;
    let tags = app.tags.read().await;
    Ok(Json(api::entities(&s, k, &tags)?))
}

async fn graph(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Envelope<GraphView>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::graph(&s)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum GraphRemoval {
    Node { address: String },
    Edge { a: String, b: String },
}

async fn graph_remove(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<GraphRemoval>, JsonRejection>,
) -> ApiResult<Envelope<GraphView>> {
    let removal = body(payload)?;
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    match removal {
        GraphRemoval::Node { address } => s.remove_node(&address)?,
        GraphRemoval::Edge { a, b } => s.remove_edge(&a, &b)?,
    }
    app.store.save_session(s.state())?;
    Ok(Json(api::graph(&s)))
}

async fn graph_undo(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Envelope<GraphView>> {
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    s.undo_removal()?;
    app.store.save_session(s.state())?;
    Ok(Json(api::graph(&s)))
}

#[derive(Debug, Deserialize)]
struct ClusterRequest {
    k: usize,
    seed: Option<u64>,
    restarts: Option<usize>,
}

async fn cluster(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<ClusterRequest>, JsonRejection>,
) -> ApiResult<Envelope<ClusterSummary>> {
    let req = body(payload)?;
    let session = app.session(&id)?;
    let mut s = session.lock().await;
    let docs = s.results().len();
    if docs > app.config.cluster_doc_cap {
        return Err(Error::ClusterCapExceeded {
            docs,
            cap: app.config.cluster_doc_cap,
        }
        .into());
    }
    s.clusterize(
        req.k,
        req.seed.unwrap_or(0),
        req.restarts.unwrap_or(app.config.restarts),
    )?;
    app.store.save_session(s.state())?;
    Ok(Json(api::cluster_summary(&s)?))
}

async fn cluster_summary(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Envelope<ClusterSummary>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::cluster_summary(&s)?))
}

async fn cluster_members(
    State(app): State<Arc<AppState>>,
    Path((id, index)): Path<(String, usize)>,
) -> ApiResult<Envelope<ClusterMembers>> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok(Json(api::cluster_members(&s, index)?))
}

async fn actions(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let session = app.session(&id)?;
    let s = session.lock().await;
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        s.export_action_log(),
    ))
}

#[derive(Debug, Deserialize)]
struct TagRequest {
    term: String,
    tag: String,
    session_id: Option<String>,
}

async fn assign_tag(
    State(app): State<Arc<AppState>>,
    payload: Result<Json<TagRequest>, JsonRejection>,
) -> ApiResult<TagUpdate> {
    let req = body(payload)?;
    let tags = match &req.session_id {
        Some(id) => {
            let session = app.session(id)?;
            let mut s = session.lock().await;
            let (_, tags) = app
                .update_tags(|store| s.assign_tag(store, &req.term, &req.tag))
                .await?;
            app.store.save_session(s.state())?;
            tags
        }
        None => {
            app.update_tags(|store| store.assign(&req.term, &req.tag))
                .await?
                .1
        }
    };
    Ok(Json(api::tag_update(&tags, &req.term)))
}

async fn tag_distribution(State(app): State<Arc<AppState>>) -> ApiResult<Vec<TagCount>> {
    Ok(Json(app.tags.read().await.distribution()))
}

#[derive(Debug, Deserialize)]
struct ReplayRequest {
    dataset_id: String,
    log: String,
}

async fn replay_log(
    State(app): State<Arc<AppState>>,
    payload: Result<Json<ReplayRequest>, JsonRejection>,
) -> ApiResult<SessionState> {
    let req = body(payload)?;
    let log = ActionLog::from_jsonl(&req.log)?;
    let dataset = app.dataset(&req.dataset_id)?;
    let (session, _) = app
        .update_tags(|store| replay(&log, dataset, store))
        .await?;
    Ok(Json(app.register(session)?))
}
