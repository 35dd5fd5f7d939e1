//! HTTP API over collection stores: creation and upload, imports, schema
//! operations guarded by `If-Match`, document edits, annotations, export
//! jobs and the curation log.
//!
//! Every collection lives in `<storage>/<id>.clv`. Mutations of one
//! collection are serialized; reads work on immutable snapshots and never
//! wait for a writer.

mod error;
mod routes;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use serde::Serialize;

use rlo_core::export::ExportProfile;
use rlo_core::store::{self, Bundle};

pub use error::{ApiError, ErrorBody};

#[derive(Debug, Clone)]
pub struct Config {
    /// Directory holding the collection stores and export artifacts.
    pub storage: PathBuf,
    /// Default `base_url` for medpix imports that do not name one.
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportJob {
    pub id: String,
    pub profile: ExportProfile,
    pub state: JobState,
    /// Schema version of the exported snapshot.
    pub version: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One open collection.
pub(crate) struct Entry {
    pub id: String,
    pub path: PathBuf,
    head: RwLock<Arc<Bundle>>,
    /// Held for the whole of a mutation, including the save.
    pub write: tokio::sync::Mutex<()>,
    pub jobs: Mutex<BTreeMap<String, ExportJob>>,
    next_job: AtomicU64,
}

impl Entry {
    fn new(id: String, path: PathBuf, bundle: Bundle) -> Self {
        Entry {
            id,
            path,
            head: RwLock::new(Arc::new(bundle)),
            write: tokio::sync::Mutex::new(()),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(1),
        }
    }

    pub fn snapshot(&self) -> Arc<Bundle> {
        self.head.read().expect("head lock").clone()
    }

    fn set_head(&self, b: Bundle) {
        *self.head.write().expect("head lock") = Arc::new(b);
    }

    pub fn next_job_id(&self) -> String {
        format!("j{}", self.next_job.fetch_add(1, Ordering::Relaxed))
    }
}

pub(crate) struct Inner {
    pub config: Config,
    collections: RwLock<BTreeMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    /// Opens the storage root, loading every `<id>.clv` store in it.
    pub fn open(config: Config) -> Result<Self, ApiError> {
        std::fs::create_dir_all(&config.storage)
            .map_err(|e| ApiError::internal(format!("{}: {e}", config.storage.display())))?;
        let mut collections = BTreeMap::new();
        let mut max = 0;
        let rd = std::fs::read_dir(&config.storage)
            .map_err(|e| ApiError::internal(format!("{}: {e}", config.storage.display())))?;
        for entry in rd.flatten() {
            let path = entry.path();
            if !path.is_dir() || path.extension().is_none_or(|e| e != "clv") {
                continue;
            }
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let bundle = store::load(&path)?;
            if let Some(n) = id.strip_prefix('c').and_then(|n| n.parse::<u64>().ok()) {
                max = max.max(n);
            }
            log::info!("loaded collection {id}");
            collections.insert(id.clone(), Arc::new(Entry::new(id, path, bundle)));
        }
        Ok(AppState(Arc::new(Inner {
            config,
            collections: RwLock::new(collections),
            next_id: AtomicU64::new(max + 1),
        })))
    }

    pub(crate) fn get(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.0
            .collections
            .read()
            .expect("collections lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("collection", id))
    }

    pub(crate) fn list(&self) -> Vec<Arc<Entry>> {
        self.0.collections.read().expect("collections lock").values().cloned().collect()
    }

    /// Saves `bundle` as a new collection and returns it.
    pub(crate) async fn create(&self, bundle: Bundle) -> Result<Arc<Entry>, ApiError> {
        let id = format!("c{}", self.0.next_id.fetch_add(1, Ordering::Relaxed));
        let path = self.0.config.storage.join(format!("{id}.clv"));
        let b = bundle.clone();
        let p = path.clone();
        blocking(move || store::save(&p, &b).map_err(ApiError::from)).await?;
        let entry = Arc::new(Entry::new(id.clone(), path, bundle));
        self.0.collections.write().expect("collections lock").insert(id, entry.clone());
        Ok(entry)
    }

    pub(crate) fn exports_dir(&self, id: &str) -> PathBuf {
        self.0.config.storage.join(format!("{id}.exports"))
    }
}

/// Runs blocking work (file I/O, imports, exports) off the async threads.
pub(crate) async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

/// Applies `f` to the head of `entry` under its write lock and persists the
/// result. `expected` is the `If-Match` version, when the caller sent one.
pub(crate) async fn mutate<T, F>(
    entry: &Arc<Entry>,
    expected: Option<u64>,
    f: F,
) -> Result<(Arc<Bundle>, T), ApiError>
where
    F: FnOnce(&Bundle) -> Result<(Bundle, T), ApiError> + Send + 'static,
    T: Send + 'static,
{
    let _guard = entry.write.lock().await;
    let head = entry.snapshot();
    check_version(&head, expected)?;
    let path = entry.path.clone();
    let (next, out) = blocking(move || {
        let (next, out) = f(&head)?;
        store::save(&path, &next)?;
        Ok((next, out))
    })
    .await?;
    entry.set_head(next);
    Ok((entry.snapshot(), out))
}

pub(crate) fn check_version(head: &Bundle, expected: Option<u64>) -> Result<(), ApiError> {
    match expected {
        Some(v) if v != head.collection.version() => Err(ApiError::new(
            StatusCode::CONFLICT,
            "stale-version",
            format!("If-Match {v} does not match version {}", head.collection.version()),
        )),
        _ => Ok(()),
    }
}

/// JSON response in the canonical encoding.
pub(crate) fn canonical_json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match rlo_core::model::to_canonical(value) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

pub fn router(state: AppState) -> Router {
    routes::router(state)
}

/// Serves until interrupted.
pub async fn serve(bind: SocketAddr, config: Config) -> std::io::Result<()> {
    let state = AppState::open(config).map_err(|e| std::io::Error::other(e.body.message))?;
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub(crate) fn artifact_path(dir: &Path, job: &str) -> PathBuf {
    dir.join(format!("{job}.zip"))
}
