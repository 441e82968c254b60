//! HTTP API over a directory of runs.
//!
//! Each run has a single-writer step lock. A step or auto request that
//! finds the lock taken is rejected with 409 rather than queued. Reads are
//! served from the last committed snapshot and never wait on the lock.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Multipart, Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::canvas::Panorama;
use crate::error::Error;
use crate::pipeline::{
    render_preview, EngineGenerator, Run, RunConfig, RunManifest, StepOverrides, StepRecord,
    MANIFEST_FILE,
};

const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("run {id} not found"))
    }

    fn busy() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "a step is already in flight for this run",
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_)
            | Error::Steering(_)
            | Error::Geometry(_)
            | Error::Dimension(_)
            | Error::Planning(_)
            | Error::Json(_)
            | Error::Image(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::State(_) | Error::Aborted => StatusCode::CONFLICT,
            Error::Transport { .. } | Error::Generator { .. } | Error::Protocol(_) => {
                StatusCode::BAD_GATEWAY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct Snapshot {
    manifest: RunManifest,
    state: Panorama,
}

struct RunEntry {
    run: Arc<Mutex<Run>>,
    snapshot: RwLock<Arc<Snapshot>>,
    generator: Arc<EngineGenerator>,
    abort: Arc<AtomicBool>,
}

impl RunEntry {
    fn new(run: Run, endpoint_override: Option<&str>) -> Self {
        let generator = EngineGenerator::from_spec(&run.config().generator, endpoint_override);
        let snapshot = Snapshot {
            manifest: run.manifest().clone(),
            state: run.state().clone(),
        };
        Self {
            run: Arc::new(Mutex::new(run)),
            snapshot: RwLock::new(Arc::new(snapshot)),
            generator: Arc::new(generator),
            abort: Arc::new(AtomicBool::new(false)),
        }
    }

    fn publish(&self, run: &Run) {
        *self.snapshot.write() = Arc::new(Snapshot {
            manifest: run.manifest().clone(),
            state: run.state().clone(),
        });
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().clone()
    }
}

/// Shared service state: the data directory and the open runs.
pub struct AppState {
    data_dir: PathBuf,
    endpoint_override: Option<String>,
    runs: RwLock<HashMap<String, Arc<RunEntry>>>,
}

impl AppState {
    /// Opens every run found under `data_dir`, recovering interrupted commits.
    pub fn load(data_dir: &Path, endpoint_override: Option<String>) -> crate::Result<Self> {
        std::fs::create_dir_all(data_dir).map_err(|e| Error::io(data_dir, e))?;
        let mut runs = HashMap::new();
        let entries = std::fs::read_dir(data_dir).map_err(|e| Error::io(data_dir, e))?;
        for entry in entries.flatten() {
            let path = entry.path();
            if !path.is_dir() {
                continue;
            }
            match Run::open(&path) {
                Ok(run) => {
                    let id = run.manifest().run_id.clone();
                    runs.insert(
                        id,
                        Arc::new(RunEntry::new(run, endpoint_override.as_deref())),
                    );
                }
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "skipping run directory")
                }
            }
        }
        Ok(Self {
            data_dir: data_dir.to_path_buf(),
            endpoint_override,
            runs: RwLock::new(runs),
        })
    }

    fn get(&self, id: &str) -> ApiResult<Arc<RunEntry>> {
        self.runs
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub fn run_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.runs.read().keys().cloned().collect();
        ids.sort();
        ids
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_manifest).delete(delete_run))
        .route("/runs/{id}/preview.png", get(get_preview))
        .route("/runs/{id}/mask.png", get(get_mask))
        .route("/runs/{id}/step", post(step_run))
        .route("/runs/{id}/auto", post(auto_run))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(app)
}

/// Serves until the listener fails.
pub async fn serve_on(listener: tokio::net::TcpListener, app: Arc<AppState>) -> crate::Result<()> {
    let addr = listener
        .local_addr()
        .map_err(|e| Error::io("listener", e))?;
    tracing::info!(%addr, "serving");
    axum::serve(listener, router(app))
        .await
        .map_err(|e| Error::io("listener", e))
}

pub async fn serve(addr: SocketAddr, app: Arc<AppState>) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    serve_on(listener, app).await
}

/// JSON part of `POST /runs`; config fields sit next to the view.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateRunRequest {
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub prompt: String,
    #[serde(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateRunResponse {
    pub run_id: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AutoRequest {
    /// Step budget; runs to completion when absent.
    #[serde(default)]
    pub steps: Option<usize>,
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(
        StatusCode::INTERNAL_SERVER_ERROR,
        format!("worker failed: {e}"),
    )
}

async fn create_run(
    State(app): State<Arc<AppState>>,
    mut multipart: Multipart,
) -> ApiResult<(StatusCode, Json<CreateRunResponse>)> {
    let bad = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m);
    let mut image = None;
    let mut request = CreateRunRequest::default();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| bad(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        match name.as_str() {
            "image" => image = Some(data),
            "config" => {
                request = serde_json::from_slice(&data).map_err(|e| bad(format!("config: {e}")))?
            }
            other => return Err(bad(format!("unexpected field {other:?}"))),
        }
    }
    let image = image.ok_or_else(|| bad("missing image field".into()))?;
    let id = uuid::Uuid::new_v4().to_string();
    let dir = app.data_dir.join(&id);
    let run_id = id.clone();
    let run = tokio::task::spawn_blocking(move || {
        let res = Run::init_with_id(
            &dir,
            &run_id,
            &image,
            request.yaw,
            request.pitch,
            &request.prompt,
            request.config,
        );
        if res.is_err() {
            let _ = std::fs::remove_dir_all(&dir);
        }
        res
    })
    .await
    .map_err(join_error)??;
    let entry = Arc::new(RunEntry::new(run, app.endpoint_override.as_deref()));
    app.runs.write().insert(id.clone(), entry);
    Ok((StatusCode::CREATED, Json(CreateRunResponse { run_id: id })))
}

async fn list_runs(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(app.run_ids())
}

async fn get_manifest(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<RunManifest>> {
    Ok(Json(app.get(&id)?.snapshot().manifest.clone()))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn get_preview(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let snap = app.get(&id)?.snapshot();
    let bytes = tokio::task::spawn_blocking(move || render_preview(&snap.state).to_png_bytes())
        .await
        .map_err(join_error)??;
    Ok(png(bytes))
}

async fn get_mask(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let snap = app.get(&id)?.snapshot();
    Ok(png(snap.state.mask().to_png_bytes()?))
}

fn parse_body<T: serde::de::DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("invalid body: {e}"),
        )
    })
}

async fn step_run(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<StepRecord>> {
    let entry = app.get(&id)?;
    let overrides: StepOverrides = parse_body(&body)?;
    let mut guard = entry
        .run
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::busy())?;
    let record = tokio::task::spawn_blocking(move || {
        let rec = guard.step(&*entry.generator, &overrides)?;
        entry.publish(&guard);
        Ok::<_, Error>(rec)
    })
    .await
    .map_err(join_error)??;
    Ok(Json(record))
}

async fn auto_run(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let entry = app.get(&id)?;
    let req: AutoRequest = parse_body(&body)?;
    let mut guard = entry
        .run
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::busy())?;
    let (tx, rx) = tokio::sync::mpsc::channel::<String>(16);
    tokio::task::spawn_blocking(move || {
        // same stopping rules as Run::auto, publishing after every commit
        let mut taken = 0;
        while !guard.is_complete() && req.steps.is_none_or(|n| taken < n) {
            let line = if entry.abort.load(Ordering::SeqCst) {
                Err(Error::Aborted)
            } else {
                guard.step(&*entry.generator, &StepOverrides::default())
            };
            entry.publish(&guard);
            taken += 1;
            match line {
                Ok(rec) => {
                    let failed = !rec.status.is_ok();
                    let json = serde_json::to_string(&rec).unwrap_or_default();
                    if tx.blocking_send(json + "\n").is_err() || failed {
                        break;
                    }
                }
                Err(e) => {
                    let json = serde_json::json!({ "error": e.to_string() }).to_string();
                    let _ = tx.blocking_send(json + "\n");
                    break;
                }
            }
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|line| (Ok::<_, Infallible>(line), rx))
    });
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(stream),
    )
        .into_response())
}

async fn delete_run(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<StatusCode> {
    let entry = app.get(&id)?;
    entry.abort.store(true, Ordering::SeqCst);
    entry.generator.cancel();
    app.runs.write().remove(&id);
    // wait for an in-flight step to notice the abort before removing files
    let run = entry.run.lock().await;
    let dir = run.dir().to_path_buf();
    if dir.join(MANIFEST_FILE).exists() {
        tokio::task::spawn_blocking(move || std::fs::remove_dir_all(&dir))
            .await
            .map_err(join_error)?
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    }
    Ok(StatusCode::NO_CONTENT)
}
