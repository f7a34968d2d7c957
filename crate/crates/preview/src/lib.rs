//! Local HTTP service exposing trajectory state and on-demand condition frames.
//!
//! Routes:
//! - `GET /state` returns the current trajectory, revision, frame count, image size and parameters.
//! - `GET /trajectory` returns the trajectory document alone.
//! - `PUT /trajectory` replaces the trajectory and bumps the revision.
//! - `GET /frame/{index}?mode=pose|depth|composite&scale=N` returns a PNG frame.
//!
//! Frame responses carry `X-Revision`, `ETag` and `X-Content-Digest` headers.
//! The `ETag` is the SHA-256 of the PNG bytes, so a conditional request whose
//! content is unchanged yields `304 Not Modified` even across revisions.

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use camcond_core::geom::CameraFrame;
use camcond_core::io::{self, encode_trajectory, BundleParams, ExtrinsicsConvention, ProjectBundle};
use camcond_core::pipeline::{prepare, PipelineError, PreparedScene};
use camcond_core::raster::{
    compose_conditions, normalize_with_range, rasterize_mesh_depth, rasterize_skeleton_masked, sequence_extrema,
    RasterError,
};
use camcond_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

pub const REVISION_HEADER: &str = "x-revision";
pub const DIGEST_HEADER: &str = "x-content-digest";

/// Largest accepted preview downscale factor.
pub const MAX_SCALE: u32 = 16;

const CACHE_CAPACITY: usize = 1024;

/// Global depth extrema of the mesh over all cameras, matching the batch renderer.
fn extrema_over(scene: &PreparedScene, cameras: &[CameraFrame]) -> Result<(f64, f64), RasterError> {
    let buffers: Vec<_> = cameras.iter().map(|c| rasterize_mesh_depth(&scene.mesh, c)).collect();
    sequence_extrema(&buffers).ok_or(RasterError::AllUncovered)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    Pose,
    Depth,
    #[default]
    Composite,
}

/// One trajectory revision with everything derived from it.
#[derive(Debug)]
pub struct Snapshot {
    pub revision: u64,
    pub trajectory: Trajectory,
    pub cameras: Vec<CameraFrame>,
    pub depth_range: (f64, f64),
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Rejected(String),
}

type CacheKey = (u64, usize, FrameMode, u32);

/// Immutable scene assets plus the current trajectory revision.
#[derive(Debug)]
pub struct Session {
    scene: PreparedScene,
    params: BundleParams,
    convention: ExtrinsicsConvention,
    snapshot: RwLock<Arc<Snapshot>>,
    cache: Mutex<HashMap<CacheKey, Arc<Vec<u8>>>>,
}

impl Session {
    /// Prepares the scene from `bundle`; revision 0 holds the bundle's trajectory.
    pub fn from_bundle(bundle: &ProjectBundle) -> Result<Self, SessionError> {
        let scene = prepare(bundle)?;
        Self::new(scene, bundle.params.clone())
    }

    pub fn new(scene: PreparedScene, params: BundleParams) -> Result<Self, SessionError> {
        let snapshot = Self::derive(&scene, scene.trajectory.clone(), 0)?;
        Ok(Self {
            scene,
            params,
            convention: ExtrinsicsConvention::WorldToCamera,
            snapshot: RwLock::new(Arc::new(snapshot)),
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn derive(scene: &PreparedScene, trajectory: Trajectory, revision: u64) -> Result<Snapshot, SessionError> {
        let cameras = trajectory.expand().map_err(|e| SessionError::Rejected(e.to_string()))?;
        if cameras.len() != scene.frame_count() {
            return Err(SessionError::Rejected(format!(
                "trajectory has {} frames, motion has {}",
                cameras.len(),
                scene.frame_count()
            )));
        }
        let depth_range = extrema_over(scene, &cameras).map_err(|e| SessionError::Rejected(e.to_string()))?;
        Ok(Snapshot {
            revision,
            trajectory,
            cameras,
            depth_range,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    pub fn scene(&self) -> &PreparedScene {
        &self.scene
    }

    /// Validates and installs a new trajectory, returning the new revision.
    /// On rejection the state and revision are unchanged.
    pub fn put_trajectory(&self, text: &str) -> Result<u64, SessionError> {
        let trajectory = io::decode_trajectory(text).map_err(|e| SessionError::Rejected(e.to_string()))?;
        // Expansion and extrema are computed before taking the lock; the revision is assigned at swap time.
        let mut derived = Self::derive(&self.scene, trajectory, 0)?;
        let revision = {
            let mut guard = self.snapshot.write().expect("snapshot lock poisoned");
            derived.revision = guard.revision + 1;
            let revision = derived.revision;
            *guard = Arc::new(derived);
            revision
        };
        self.cache
            .lock()
            .expect("cache lock poisoned")
            .retain(|k, _| k.0 >= revision);
        log::info!("trajectory revision {revision}");
        Ok(revision)
    }

    /// Renders one frame against `snap` and encodes it exactly as the batch writer does.
    pub fn render(&self, snap: &Snapshot, index: usize, mode: FrameMode, scale: u32) -> Vec<u8> {
        let key = (snap.revision, index, mode, scale);
        if let Some(hit) = self.cache.lock().expect("cache lock poisoned").get(&key) {
            return hit.as_ref().clone();
        }
        let scene = &self.scene;
        let (cam, style) = if scale == 1 {
            (snap.cameras[index], scene.style.clone())
        } else {
            (snap.cameras[index].downscaled(scale), scene.style.downscaled(scale))
        };
        let pose = || {
            let valid = scene.motion.valid.as_ref().map(|v| v[index].as_slice());
            rasterize_skeleton_masked(&scene.motion.frames[index], valid, &cam, &style)
        };
        let depth = || normalize_with_range(&rasterize_mesh_depth(&scene.mesh, &cam), snap.depth_range, scene.polarity);
        let bytes = match mode {
            FrameMode::Pose => io::encode_rgb_png(&pose()),
            FrameMode::Depth => io::encode_gray_png(&depth()),
            FrameMode::Composite => {
                let composed = compose_conditions(&depth(), &pose()).expect("same camera, same size");
                io::encode_rgb_png(&composed)
            }
        };
        let mut cache = self.cache.lock().expect("cache lock poisoned");
        if cache.len() >= CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(key, Arc::new(bytes.clone()));
        bytes
    }

    pub fn trajectory_json(&self, snap: &Snapshot) -> serde_json::Value {
        serde_json::from_str(&encode_trajectory(&snap.trajectory, self.convention))
            .expect("trajectory encoder emits valid JSON")
    }
}

#[derive(Debug, Serialize)]
struct StateResponse {
    revision: u64,
    frames: usize,
    width: u32,
    height: u32,
    trajectory: serde_json::Value,
    params: BundleParams,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: message.into() })).into_response()
}

fn with_revision(mut resp: Response, revision: u64) -> Response {
    resp.headers_mut()
        .insert(REVISION_HEADER, HeaderValue::from(revision));
    resp
}

async fn get_state(State(session): State<Arc<Session>>) -> Response {
    let snap = session.snapshot();
    let base = snap.trajectory.base;
    let body = StateResponse {
        revision: snap.revision,
        frames: snap.cameras.len(),
        width: base.width,
        height: base.height,
        trajectory: session.trajectory_json(&snap),
        params: session.params.clone(),
    };
    with_revision(Json(body).into_response(), snap.revision)
}

async fn get_trajectory(State(session): State<Arc<Session>>) -> Response {
    let snap = session.snapshot();
    with_revision(Json(session.trajectory_json(&snap)).into_response(), snap.revision)
}

async fn put_trajectory(State(session): State<Arc<Session>>, body: String) -> Response {
    let s = session.clone();
    match tokio::task::spawn_blocking(move || s.put_trajectory(&body)).await {
        Ok(Ok(revision)) => with_revision(Json(serde_json::json!({ "revision": revision })).into_response(), revision),
        Ok(Err(e)) => with_revision(
            error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            session.snapshot().revision,
        ),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Deserialize)]
struct FrameQuery {
    #[serde(default)]
    mode: FrameMode,
    #[serde(default = "one")]
    scale: u32,
}

fn one() -> u32 {
    1
}

async fn get_frame(
    State(session): State<Arc<Session>>,
    Path(index): Path<usize>,
    Query(q): Query<FrameQuery>,
    headers: HeaderMap,
) -> Response {
    if !(1..=MAX_SCALE).contains(&q.scale) {
        return error(StatusCode::BAD_REQUEST, format!("scale must lie in 1..={MAX_SCALE}"));
    }
    let snap = session.snapshot();
    if index >= snap.cameras.len() {
        return with_revision(
            error(
                StatusCode::NOT_FOUND,
                format!("frame {index} out of range 0..{}", snap.cameras.len()),
            ),
            snap.revision,
        );
    }
    let revision = snap.revision;
    let s = session.clone();
    let bytes = match tokio::task::spawn_blocking(move || s.render(&snap, index, q.mode, q.scale)).await {
        Ok(b) => b,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let digest = io::sha256_hex(&bytes);
    let etag = format!("\"{digest}\"");
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    let mut resp = if matches {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        let mut r = Response::new(Body::from(bytes));
        r.headers_mut()
            .insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
        r
    };
    let h = resp.headers_mut();
    h.insert(header::ETAG, HeaderValue::from_str(&etag).expect("hex is a valid header"));
    h.insert(
        DIGEST_HEADER,
        HeaderValue::from_str(&format!("sha-256={digest}")).expect("hex is a valid header"),
    );
    with_revision(resp, revision)
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/trajectory", get(get_trajectory).put(put_trajectory))
        .route("/frame/{index}", get(get_frame))
        .with_state(session)
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {addr} is already in use")]
    PortInUse { addr: SocketAddr },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Server(#[from] std::io::Error),
}

pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|source| {
        if source.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse { addr }
        } else {
            ServeError::Bind { addr, source }
        }
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    session: Arc<Session>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("preview service listening on http://{addr}");
    }
    axum::serve(listener, router(session))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
