//! HTTP/JSON front end for draft scoring.
//!
//! The loaded model lives in a [`ModelSlot`]: handlers take a cheap
//! reference-counted snapshot per request, and a reload replaces the whole
//! scorer at once so a request never observes half of two models.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, SystemTime};

use askwell_core::scoring::{DraftRequest, ModelArtifact, Scorer, Toggle};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot load model artifact {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: askwell_core::Error,
    },
    #[error("no model source configured")]
    NoSource,
    #[error("invalid CORS origin {0:?}")]
    Origin(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

/// Shared, atomically replaceable scorer.
#[derive(Debug, Default)]
pub struct ModelSlot {
    scorer: RwLock<Option<Arc<Scorer>>>,
    source: Option<PathBuf>,
}

impl ModelSlot {
    pub fn empty() -> Self {
        ModelSlot::default()
    }

    pub fn with_scorer(scorer: Scorer) -> Self {
        ModelSlot {
            scorer: RwLock::new(Some(Arc::new(scorer))),
            source: None,
        }
    }

    /// A slot bound to an artifact file, loaded immediately.
    pub fn from_file(path: impl Into<PathBuf>) -> Result<Self, ServerError> {
        let slot = ModelSlot {
            scorer: RwLock::new(None),
            source: Some(path.into()),
        };
        slot.reload()?;
        Ok(slot)
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn current(&self) -> Option<Arc<Scorer>> {
        self.scorer.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn install(&self, scorer: Scorer) {
        *self.scorer.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(scorer));
    }

    /// Re-reads the source artifact. On failure the previous model stays.
    pub fn reload(&self) -> Result<String, ServerError> {
        let path = self.source.as_ref().ok_or(ServerError::NoSource)?;
        let load = |p: &Path| ModelArtifact::load(p).and_then(Scorer::new);
        let scorer = load(path).map_err(|source| ServerError::Load {
            path: path.clone(),
            source,
        })?;
        let schema = scorer.artifact().schema_id.clone();
        self.install(scorer);
        log::info!("loaded model {schema} from {}", path.display());
        Ok(schema)
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    /// Allowed browser origins; empty means any origin.
    pub cors_origins: Vec<String>,
    /// How often to check the artifact file for changes.
    pub reload_interval: Option<Duration>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            cors_origins: Vec::new(),
            reload_interval: None,
        }
    }
}

/// An error rendered as `{"error": ...}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn unloaded() -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no model loaded")
    }
}

impl From<askwell_core::Error> for ApiError {
    fn from(e: askwell_core::Error) -> Self {
        use askwell_core::Error as E;
        let status = match e {
            E::InvalidArgument(_) | E::BeforeEpoch { .. } | E::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

/// Parses a JSON body; any syntax or shape problem is a 400.
fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

fn scorer(slot: &ModelSlot) -> Result<Arc<Scorer>, ApiError> {
    slot.current().ok_or_else(ApiError::unloaded)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub draft: DraftRequest,
    pub toggles: Vec<Toggle>,
}

async fn healthz(State(slot): State<Arc<ModelSlot>>) -> Json<serde_json::Value> {
    let model = slot.current();
    Json(json!({
        "status": "ok",
        "model_loaded": model.is_some(),
        "schema_id": model.map(|s| s.artifact().schema_id.clone()),
    }))
}

async fn model_info(State(slot): State<Arc<ModelSlot>>) -> Result<Response, ApiError> {
    Ok(Json(scorer(&slot)?.model_info()).into_response())
}

async fn score(State(slot): State<Arc<ModelSlot>>, body: Bytes) -> Result<Response, ApiError> {
    let s = scorer(&slot)?;
    let draft: DraftRequest = parse(&body)?;
    Ok(Json(s.score(&draft)?).into_response())
}

async fn what_if(State(slot): State<Arc<ModelSlot>>, body: Bytes) -> Result<Response, ApiError> {
    let s = scorer(&slot)?;
    let req: WhatIfRequest = parse(&body)?;
    Ok(Json(s.evaluate(&req.draft, &req.toggles)?).into_response())
}

async fn reload(State(slot): State<Arc<ModelSlot>>) -> Result<Response, ApiError> {
    match slot.reload() {
        Ok(schema) => Ok(Json(json!({ "reloaded": true, "schema_id": schema })).into_response()),
        Err(ServerError::NoSource) => Err(ApiError::new(StatusCode::CONFLICT, "no model file configured")),
        Err(e) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())),
    }
}

fn cors(origins: &[String]) -> Result<CorsLayer, ServerError> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    if origins.is_empty() {
        return Ok(layer.allow_origin(Any));
    }
    let parsed = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServerError::Origin(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(layer.allow_origin(AllowOrigin::list(parsed)))
}

/// The full route table with CORS applied.
pub fn router(slot: Arc<ModelSlot>, cors_origins: &[String]) -> Result<Router, ServerError> {
    Ok(Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/model", get(model_info))
        .route("/v1/score", post(score))
        .route("/v1/what-if", post(what_if))
        .route("/v1/reload", post(reload))
        .layer(cors(cors_origins)?)
        .with_state(slot))
}

fn modified(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Polls the slot's source file and reloads when its mtime changes.
pub fn spawn_reloader(slot: Arc<ModelSlot>, every: Duration) -> Option<tokio::task::JoinHandle<()>> {
    let path = slot.source()?.to_path_buf();
    Some(tokio::spawn(async move {
        let mut seen = modified(&path);
        let mut tick = tokio::time::interval(every);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            tick.tick().await;
            let now = modified(&path);
            if now.is_some() && now != seen {
                seen = now;
                if let Err(e) = slot.reload() {
                    log::warn!("keeping previous model: {e}");
                }
            }
        }
    }))
}

/// Binds and serves until ctrl-c.
pub async fn serve(slot: Arc<ModelSlot>, config: &ServerConfig) -> Result<(), ServerError> {
    let app = router(slot.clone(), &config.cors_origins)?;
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServerError::Bind {
            addr: config.addr,
            source,
        })?;
    let _reloader = config.reload_interval.and_then(|d| spawn_reloader(slot, d));
    log::info!("listening on {}", config.addr);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServerError::Serve)
}
