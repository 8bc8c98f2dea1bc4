//! HTTP/JSON API over the workbench and the authoring state.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geoqa_core::adapters::{AdapterError, NormalizedResponse, UnifiedQuery};
use geoqa_core::cache::CacheError;
use geoqa_core::context::{context_stats, render_formatted, render_structured, suggest_places};
use geoqa_core::dataset::DatasetError;
use geoqa_core::gateway::GatewayError;
use geoqa_core::pipeline::{PipelineError, Workbench};
use geoqa_core::polyline::downsample;
use geoqa_core::qa::{build_prompt, compare_answer, QaDraft, Rendering, Verdict};
use geoqa_core::{LatLng, ProviderId, ToolKind};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::studio::{Studio, StudioError, Target};

/// Decoded route points returned per route, at most.
pub const MAX_ROUTE_POINTS: usize = 10_000;

pub const OPENAPI: &str = include_str!("../openapi.json");

pub struct AppState {
    pub workbench: Workbench,
    pub studio: Mutex<Studio>,
    /// Persisted after every change when set.
    pub session_file: Option<PathBuf>,
}

impl AppState {
    pub fn new(workbench: Workbench, studio: Studio, session_file: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            workbench,
            studio: Mutex::new(studio),
            session_file,
        })
    }

    /// Runs `f` on the authoring state and persists the result.
    fn mutate<T>(&self, f: impl FnOnce(&mut Studio) -> Result<T, StudioError>) -> Result<T, ApiError> {
        let mut studio = self.studio.lock().expect("studio lock");
        let out = f(&mut studio)?;
        if let Some(path) = &self.session_file {
            studio.save(path)?;
        }
        Ok(out)
    }

    fn read<T>(&self, f: impl FnOnce(&Studio) -> Result<T, StudioError>) -> Result<T, ApiError> {
        Ok(f(&self.studio.lock().expect("studio lock"))?)
    }
}

/// JSON error body: `{code, message}` plus `pointer` for dataset violations.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub pointer: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
            pointer: None,
        }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"code": self.code, "message": self.message});
        if let Some(p) = self.pointer {
            body["pointer"] = Value::String(p);
        }
        (self.status, Json(body)).into_response()
    }
}

fn adapter_status(e: &AdapterError) -> StatusCode {
    match e {
        AdapterError::MalformedProviderResponse { .. } => StatusCode::BAD_GATEWAY,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Adapter(a) | PipelineError::Cache(CacheError::Adapter(a)) => adapter_status(a),
            PipelineError::Gateway(GatewayError::ReplayMiss(_)) => StatusCode::CONFLICT,
            PipelineError::Gateway(GatewayError::ProviderUnavailable(_) | GatewayError::ProviderError { .. }) => {
                StatusCode::BAD_GATEWAY
            }
            PipelineError::Context(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        log::warn!("tool run failed: {e}");
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<StudioError> for ApiError {
    fn from(e: StudioError) -> Self {
        let status = if e.is_not_found() {
            StatusCode::NOT_FOUND
        } else if matches!(e, StudioError::SessionFile { .. }) {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::BAD_REQUEST
        };
        let pointer = match &e {
            StudioError::Dataset(DatasetError::SchemaViolation { pointer, .. }) => Some(pointer.clone()),
            _ => None,
        };
        ApiError {
            status,
            code: e.code().to_string(),
            message: e.to_string(),
            pointer,
        }
    }
}

/// Parses a JSON body, reporting failures as 400 `InvalidRequest`.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("InvalidRequest", e.to_string()))
}

pub fn router(state: Arc<AppState>, cors_origins: &[String], ui_dir: Option<PathBuf>) -> Router {
    let origins: Vec<HeaderValue> = cors_origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/openapi.json", get(openapi))
        .route("/api/sessions", post(open_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/contexts", get(list_contexts).post(create_context))
        .route("/api/tools/{tool}", post(run_tool))
        .route("/api/context/{id}", get(get_context))
        .route("/api/context/{id}/suggest", get(suggest))
        .route("/api/qa", get(list_qa).post(create_qa))
        .route("/api/qa/{id}/prompt", post(prompt))
        .route("/api/qa/{id}/compare", post(compare))
        .route("/api/dataset/export", post(export_dataset))
        .route("/api/dataset/import", post(import_dataset))
        .route("/api/cache/stats", get(cache_stats))
        .with_state(state)
        .layer(cors);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({"status": "ok", "mode": state.workbench.gateway.mode()}))
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}

async fn open_session(State(state): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    let mode = state.workbench.gateway.mode();
    let session = state.mutate(|s| Ok(s.open_session(mode)))?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.read(|s| s.session(&id).cloned())?))
}

#[derive(Serialize)]
struct ContextSummary {
    id: String,
    title: String,
    entries: usize,
}

async fn list_contexts(State(state): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    let list = state.read(|s| {
        Ok(s.contexts()
            .map(|c| ContextSummary {
                id: c.id().to_string(),
                title: c.title().to_string(),
                entries: c.len(),
            })
            .collect::<Vec<_>>())
    })?;
    Ok(Json(list))
}

#[derive(Deserialize)]
struct NewContext {
    title: String,
    #[serde(default)]
    session_id: Option<String>,
}

async fn create_context(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: NewContext = parse_body(&body)?;
    let id = state.mutate(|s| s.new_context(&req.title, req.session_id.as_deref()))?;
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

#[derive(Deserialize)]
struct ToolRequest {
    provider: String,
    #[serde(flatten)]
    target: Target,
    /// Everything else is a tool parameter.
    #[serde(flatten)]
    parameters: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePoints {
    pub route_index: usize,
    pub total_points: usize,
    pub downsampled: bool,
    pub points: Vec<LatLng>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub context_id: String,
    pub entry_index: usize,
    pub cache_hit: bool,
    pub cache_key: String,
    pub normalized: NormalizedResponse,
    pub route_points: Vec<RoutePoints>,
}

/// Decodes every route, capped at [`MAX_ROUTE_POINTS`] by uniform stride.
pub fn route_points(n: &NormalizedResponse) -> Result<Vec<RoutePoints>, ApiError> {
    n.routes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let points = r
                .decoded_points()
                .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "MalformedProviderResponse", e.to_string()))?;
            Ok(RoutePoints {
                route_index: i,
                total_points: points.len(),
                downsampled: points.len() > MAX_ROUTE_POINTS,
                points: downsample(&points, MAX_ROUTE_POINTS),
            })
        })
        .collect()
}

async fn run_tool(
    State(state): State<Arc<AppState>>,
    Path(tool): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let tool = ToolKind::from_slug(&tool)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UnknownTool", format!("unknown tool '{tool}'")))?;
    let mut req: ToolRequest = parse_body(&body)?;
    let provider: ProviderId = req
        .provider
        .parse()
        .map_err(|e: geoqa_core::model::ModelError| ApiError::bad_request("UnknownProvider", e.to_string()))?;
    for key in ["provider", "context_id", "session_id", "title"] {
        req.parameters.remove(key);
    }
    // Reject unknown targets before spending a provider call.
    state.read(|s| s.resolve(&req.target))?;
    let query = UnifiedQuery {
        tool,
        parameters: req.parameters,
    };
    let wb = state.workbench.clone();
    let outcome = tokio::task::spawn_blocking(move || wb.run_tool(provider, &query))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let normalized = outcome.draft.normalized().clone();
    let route_points = route_points(&normalized)?;
    let (context_id, entry_index) = state.mutate(|s| s.append(&req.target, outcome.draft))?;
    Ok(Json(ToolResponse {
        context_id,
        entry_index,
        cache_hit: outcome.cache_hit,
        cache_key: outcome.cache_key.to_string(),
        normalized,
        route_points,
    }))
}

#[derive(Deserialize)]
struct RenderingQuery {
    rendering: Option<String>,
}

async fn get_context(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<RenderingQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let rendering: Rendering = q
        .rendering
        .as_deref()
        .unwrap_or("formatted")
        .parse()
        .map_err(|e: String| ApiError::bad_request("InvalidParameter", e))?;
    let ctx = state.read(|s| s.context(&id).cloned())?;
    let text = match rendering {
        Rendering::Structured => render_structured(&ctx),
        Rendering::Formatted => render_formatted(&ctx),
    };
    let stats = context_stats(&ctx).ok();
    Ok(Json(json!({
        "id": ctx.id(),
        "title": ctx.title(),
        "entries": ctx.len(),
        "rendering": rendering,
        "text": text,
        "stats": stats,
    })))
}

#[derive(Deserialize)]
struct SuggestQuery {
    #[serde(default)]
    prefix: String,
}

async fn suggest(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<SuggestQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let names = state.read(|s| Ok(suggest_places(s.context(&id)?, &q.prefix)))?;
    Ok(Json(names))
}

async fn list_qa(State(state): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.read(|s| Ok(s.qa_pairs().to_vec()))?))
}

async fn create_qa(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let draft: QaDraft = parse_body(&body)?;
    let pair = state.mutate(|s| s.add_qa(draft))?;
    Ok((StatusCode::CREATED, Json(pair)))
}

#[derive(Deserialize)]
struct PromptRequest {
    #[serde(default = "default_rendering")]
    rendering: Rendering,
}

fn default_rendering() -> Rendering {
    Rendering::Formatted
}

async fn prompt(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: PromptRequest = parse_body(&body)?;
    let bundle = state.read(|s| {
        let qa = s.qa(&id)?;
        Ok(build_prompt(s.context(&qa.context_id)?, qa, req.rendering))
    })?;
    Ok(Json(bundle))
}

#[derive(Deserialize)]
struct CompareRequest {
    response: String,
}

#[derive(Serialize)]
struct CompareResponse {
    qa_id: String,
    verdict: Verdict,
}

async fn compare(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: CompareRequest = parse_body(&body)?;
    let verdict = state.read(|s| Ok(compare_answer(s.qa(&id)?, &req.response)))?;
    Ok(Json(CompareResponse { qa_id: id, verdict }))
}

#[derive(Deserialize, Default)]
struct ExportRequest {
    #[serde(default)]
    context_ids: Vec<String>,
}

async fn export_dataset(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: ExportRequest = parse_body(&body)?;
    let bytes = state.mutate(|s| s.export(&req.context_ids))?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/json"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"dataset.json\""),
        ],
        bytes,
    ))
}

async fn import_dataset(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let (contexts, qa_pairs) = state.mutate(|s| s.import(&body))?;
    Ok(Json(json!({"contexts": contexts, "qa_pairs_added": qa_pairs})))
}

async fn cache_stats(State(state): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    let stats = state
        .workbench
        .cache
        .stats()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageUnavailable", e.to_string()))?;
    Ok(Json(json!({
        "stats": stats,
        "network_calls": state.workbench.gateway.network_calls(),
        "mode": state.workbench.gateway.mode(),
    })))
}
