// SPDX-License-Identifier: Apache-2.0

//! HTTP/JSON API over a committed index.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use topsurf_core::query::{region_query, NegativeMode, QuerySpec, Rect};
use topsurf_core::{Corpus, WordIndex};

use crate::config::QuerySettings;
use crate::error::{Error, Result};
use crate::imageio::content_type;
use crate::store::IndexStore;

/// A loaded index ready for queries.
#[derive(Debug)]
pub struct Engine {
    pub store: IndexStore,
    pub image_root: PathBuf,
    pub defaults: QuerySettings,
}

/// Service state. A dictionary that does not match the index puts the service
/// into a mode where every API call answers 409.
#[derive(Debug)]
pub enum AppState {
    Ready(Engine),
    Mismatch(String),
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn not_found(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::NOT_FOUND, msg.into())
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl From<topsurf_core::Error> for ApiError {
    fn from(e: topsurf_core::Error) -> Self {
        match e {
            topsurf_core::Error::NotFound(_) => ApiError(StatusCode::NOT_FOUND, e.to_string()),
            _ => ApiError(StatusCode::BAD_REQUEST, e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: &self.1 })).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn engine(state: &AppState) -> ApiResult<&Engine> {
    match state {
        AppState::Ready(e) => Ok(e),
        AppState::Mismatch(msg) => Err(ApiError(StatusCode::CONFLICT, msg.clone())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub images: usize,
    pub words: u32,
    pub categories: usize,
    pub dictionary_checksum: String,
}

async fn health(State(state): State<Arc<AppState>>) -> ApiResult<Json<Health>> {
    let e = engine(&state)?;
    Ok(Json(Health {
        status: "ok".into(),
        images: e.store.image_count(),
        words: e.store.word_count(),
        categories: e.store.tags().count(),
        dictionary_checksum: e.store.manifest().dictionary_checksum.clone(),
    }))
}

async fn categories(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(engine(&state)?.store.tags().map(String::from).collect()))
}

#[derive(Deserialize)]
struct SearchParams {
    tag: Option<String>,
}

async fn search(
    State(state): State<Arc<AppState>>,
    Query(params): Query<SearchParams>,
) -> ApiResult<Json<Vec<String>>> {
    let e = engine(&state)?;
    let tag = params.tag.ok_or_else(|| ApiError::bad_request("missing tag parameter"))?;
    let ids = e.store.tagged(&tag);
    if ids.is_empty() {
        return Err(ApiError::not_found(format!("unknown tag {tag:?}")));
    }
    Ok(Json(ids.to_vec()))
}

fn known<'a>(e: &'a Engine, id: &str) -> ApiResult<&'a topsurf_core::ImageDescriptor> {
    e.store.descriptor(id).ok_or_else(|| ApiError::not_found(format!("unknown image {id:?}")))
}

async fn image_bytes(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let e = engine(&state)?;
    known(e, &id)?;
    let path = e.image_root.join(&id);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::not_found(format!("image file for {id:?} is not available")))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordOverlay {
    pub index: WordIndex,
    pub weight: f64,
    pub locations: Vec<(f32, f32)>,
}

async fn image_words(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<WordOverlay>>> {
    let desc = known(engine(&state)?, &id)?;
    Ok(Json(
        desc.occurrences
            .iter()
            .map(|o| WordOverlay { index: o.index, weight: o.weight(), locations: o.locations.clone() })
            .collect(),
    ))
}

/// Body of `POST /api/query`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub source_image: String,
    pub rects: Vec<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_source: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_mode: Option<NegativeMode>,
}

impl QueryRequest {
    pub fn to_spec(&self, defaults: &QuerySettings) -> QuerySpec {
        let mut spec = QuerySpec::new(self.source_image.clone(), self.rects.clone())
            .with_negative_weight(self.lambda.unwrap_or(defaults.lambda))
            .with_limit(self.limit.unwrap_or(defaults.limit));
        if let Some(x) = self.exclude_source {
            spec = spec.with_exclude_source(x);
        }
        if let Some(m) = self.negative_mode {
            spec = spec.with_negative_mode(m);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub image_id: String,
    pub score: f64,
    pub similarity: f64,
    pub matched_positive: usize,
    pub matched_negative: usize,
    pub positive_words: Vec<WordIndex>,
    pub negative_words: Vec<WordIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub source_image: String,
    pub results: Vec<QueryHit>,
}

async fn query(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<QueryResponse>> {
    let e = engine(&state)?;
    let req: QueryRequest =
        serde_json::from_slice(&body).map_err(|err| ApiError::bad_request(format!("malformed query: {err}")))?;
    if req.rects.iter().any(|r| !r.is_valid()) {
        return Err(ApiError::bad_request("malformed rectangle"));
    }
    let spec = req.to_spec(&e.defaults);
    let results = region_query(&spec, &e.store)?;
    Ok(Json(QueryResponse {
        source_image: req.source_image,
        results: results
            .into_iter()
            .map(|r| QueryHit {
                matched_positive: r.matched_positive.len(),
                matched_negative: r.matched_negative.len(),
                positive_words: r.matched_positive.into_iter().collect(),
                negative_words: r.matched_negative.into_iter().collect(),
                image_id: r.image_id,
                score: r.score,
                similarity: r.similarity,
            })
            .collect(),
    }))
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/categories", get(categories))
        .route("/api/search", get(search))
        .route("/api/images/{id}", get(image_bytes))
        .route("/api/images/{id}/words", get(image_words))
        .route("/api/query", post(query))
        .with_state(Arc::new(state));
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Opens the index, checks it against the dictionary checksum and builds the
/// service state. Only a checksum mismatch yields [`AppState::Mismatch`].
pub fn load_state(
    index_root: &std::path::Path,
    checksum: &str,
    image_root: PathBuf,
    defaults: QuerySettings,
) -> Result<AppState> {
    let store = IndexStore::open(index_root)?;
    match store.check_dictionary(checksum) {
        Ok(()) => Ok(AppState::Ready(Engine { store, image_root, defaults })),
        Err(e @ Error::DictionaryMismatch { .. }) => {
            log::error!("{e}");
            Ok(AppState::Mismatch(e.to_string()))
        }
        Err(e) => Err(e),
    }
}

pub async fn serve(bind: &str, app: Router) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| Error::io(bind, e))?;
    log::info!("listening on {}", listener.local_addr().map_err(|e| Error::io(bind, e))?);
    axum::serve(listener, app).await.map_err(|e| Error::io(bind, e))
}
