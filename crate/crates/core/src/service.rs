//! HTTP API for generation, inversion, rendering and parameter editing.
//!
//! Every response carries an `x-content-hash` header: the FNV-1a hash of the
//! body bytes, so identical requests can be compared without diffing bodies.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::{invalid, Error, Result};
use crate::generators::{generate, list_generators, schema, TriangleMesh};
use crate::pipeline::{fnv1a, invert, Checkpoint};
use crate::render::{rasterize, Camera, Image, RenderMode, DEFAULT_IMAGE_SIZE};

/// Environment variable that overrides the configured bind address.
pub const BIND_ENV: &str = "PROCINV_BIND";
pub const HASH_HEADER: &str = "x-content-hash";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub generator_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub checkpoints: Vec<CheckpointEntry>,
    /// Size of images produced by `/api/render` when the request gives none.
    pub image_size: usize,
    pub max_body_bytes: usize,
    pub max_k: usize,
    pub max_image_size: usize,
    /// Inversions allowed to run at once; further requests queue.
    pub invert_concurrency: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            checkpoints: Vec::new(),
            image_size: DEFAULT_IMAGE_SIZE,
            max_body_bytes: 1 << 20,
            max_k: 32,
            max_image_size: 512,
            invert_concurrency: 2,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        let limits = [self.image_size, self.max_body_bytes, self.max_k, self.max_image_size, self.invert_concurrency];
        if limits.contains(&0) {
            return Err(invalid("service limits must be positive"));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.checkpoints {
            schema(&c.generator_id)?;
            if !seen.insert(&c.generator_id) {
                return Err(invalid(format!("more than one checkpoint for `{}`", c.generator_id)));
            }
        }
        Ok(())
    }

    /// The bind address after applying the environment override.
    pub fn bind_address(&self) -> String {
        std::env::var(BIND_ENV).unwrap_or_else(|_| self.bind.clone())
    }
}

/// Immutable state shared by all requests.
#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    checkpoints: Arc<HashMap<String, Checkpoint>>,
    inversions: Arc<Semaphore>,
}

impl AppState {
    /// Validates the config and loads every checkpoint it names.
    pub fn load(config: ServiceConfig) -> Result<Self> {
        config.validate()?;
        let mut map = HashMap::new();
        for c in &config.checkpoints {
            let ck = Checkpoint::load(&c.path)?;
            if ck.generator_id != c.generator_id {
                return Err(invalid(format!(
                    "{} holds a `{}` model, configured for `{}`",
                    c.path.display(),
                    ck.generator_id,
                    c.generator_id
                )));
            }
            map.insert(c.generator_id.clone(), ck);
        }
        Ok(Self::with_checkpoints(config, map))
    }

    pub fn with_checkpoints(config: ServiceConfig, checkpoints: HashMap<String, Checkpoint>) -> Self {
        let permits = config.invert_concurrency;
        Self { config: Arc::new(config), checkpoints: Arc::new(checkpoints), inversions: Arc::new(Semaphore::new(permits)) }
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/api/generators", get(generators))
        .route("/api/generators/:id/schema", get(schema_of))
        .route("/api/generators/:id/mesh", post(mesh))
        .route("/api/mesh", post(mesh_by_body))
        .route("/api/invert", post(invert_image))
        .route("/api/render", post(render))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Runs the service until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let addr = config.bind_address();
    let state = AppState::load(config)?;
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    axum::serve(listener, router(state)).await?;
    Ok(())
}

/// JSON body with the content-hash header.
fn reply(status: StatusCode, body: &Value) -> Response {
    let bytes = serde_json::to_vec(body).expect("JSON values serialize");
    let hash = format!("{:016x}", fnv1a(&bytes));
    let mut r = (status, bytes).into_response();
    let headers = r.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert(HASH_HEADER, HeaderValue::from_str(&hash).expect("hex is a valid header"));
    r
}

struct ApiError(StatusCode, Value);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NotFound(_) => ApiError(StatusCode::NOT_FOUND, json!({ "error": msg })),
            Error::InvalidParam(field) => {
                ApiError(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": msg, "field": field }))
            }
            Error::InvalidInput(_) | Error::Format(_) | Error::Json(_) => {
                ApiError(StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": msg }))
            }
            _ => ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg })),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        reply(self.0, &self.1)
    }
}

type ApiResult = std::result::Result<Response, ApiError>;

fn ok(body: Value) -> ApiResult {
    Ok(reply(StatusCode::OK, &body))
}

fn parse_json(body: &Bytes) -> std::result::Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::from(Error::Json(e)))
}

pub fn mesh_json(mesh: &TriangleMesh) -> Value {
    json!({ "vertices": mesh.vertices, "triangles": mesh.triangles })
}

async fn generators() -> ApiResult {
    ok(json!(list_generators()))
}

async fn schema_of(Path(id): Path<String>) -> ApiResult {
    ok(serde_json::to_value(schema(&id)?).map_err(Error::from)?)
}

fn mesh_for(id: &str, params: &Value) -> ApiResult {
    let s = schema(id)?;
    let p = s.params_from_json(params)?;
    ok(mesh_json(&generate(&s, &p)?))
}

async fn mesh(Path(id): Path<String>, body: Bytes) -> ApiResult {
    // resolve the generator first so unknown ids are 404 whatever the body
    schema(&id)?;
    mesh_for(&id, &parse_json(&body)?)
}

/// Same as the per-generator route with `{generator_id, params}` in the body.
async fn mesh_by_body(body: Bytes) -> ApiResult {
    let v = parse_json(&body)?;
    let id = v["generator_id"].as_str().ok_or_else(|| Error::InvalidParam("generator_id".into()))?;
    mesh_for(id, v.get("params").unwrap_or(&json!({})))
}

#[derive(Deserialize)]
struct InvertRequest {
    generator_id: String,
    image: String,
    #[serde(default = "one")]
    k: usize,
    #[serde(default)]
    seed: u64,
}

fn one() -> usize {
    1
}

async fn invert_image(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: InvertRequest = serde_json::from_slice(&body).map_err(Error::from)?;
    let s = schema(&req.generator_id)?;
    let Some(ck) = state.checkpoints.get(&req.generator_id) else {
        return Err(ApiError(
            StatusCode::SERVICE_UNAVAILABLE,
            json!({ "error": format!("no checkpoint loaded for `{}`", req.generator_id) }),
        ));
    };
    if req.k == 0 {
        return Err(Error::InvalidParam("k".into()).into());
    }
    if req.k > state.config.max_k {
        return Err(ApiError(
            StatusCode::PAYLOAD_TOO_LARGE,
            json!({ "error": format!("k is limited to {}", state.config.max_k) }),
        ));
    }
    let bytes = B64.decode(req.image.as_bytes()).map_err(|_| Error::InvalidParam("image".into()))?;
    let image = Image::from_pgm_bytes(&bytes)?;
    let _permit = state.inversions.clone().acquire_owned().await.expect("semaphore is never closed");
    let ck = ck.clone();
    let (k, seed) = (req.k, req.seed);
    let results = tokio::task::spawn_blocking(move || invert(&image, &ck, k, seed))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })))??;
    let list: Vec<Value> =
        results.iter().map(|c| json!({ "params": s.params_to_json(&c.params), "score": c.score })).collect();
    ok(json!(list))
}

#[derive(Deserialize)]
struct CameraRequest {
    azimuth_deg: f64,
    elevation_deg: f64,
    distance_factor: f64,
}

async fn render(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let v = parse_json(&body)?;
    let id = v["generator_id"].as_str().ok_or_else(|| Error::InvalidParam("generator_id".into()))?;
    let s = schema(id)?;
    let p = s.params_from_json(v.get("params").unwrap_or(&json!({})))?;
    let size = match v.get("image_size") {
        None => state.config.image_size,
        Some(n) => n.as_u64().ok_or_else(|| Error::InvalidParam("image_size".into()))? as usize,
    };
    if size > state.config.max_image_size {
        return Err(ApiError(
            StatusCode::PAYLOAD_TOO_LARGE,
            json!({ "error": format!("image_size is limited to {}", state.config.max_image_size) }),
        ));
    }
    let camera = match v.get("camera") {
        None => crate::render::default_camera(),
        Some(c) => {
            let c: CameraRequest =
                serde_json::from_value(c.clone()).map_err(|_| Error::InvalidParam("camera".into()))?;
            Camera::new(c.azimuth_deg, c.elevation_deg, c.distance_factor)
        }
    }
    .with_size(size);
    camera.validate().map_err(|_| Error::InvalidParam("camera".into()))?;
    let img = rasterize(&generate(&s, &p)?, &camera, RenderMode::Shaded)?;
    ok(json!({ "image": B64.encode(img.to_pgm_bytes()), "width": size, "height": size }))
}
