use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use rlo_core::curation::{self, DocCommand};
use rlo_core::export::{export_package, validate_package, ExportProfile};
use rlo_core::import::{import, ImportParams, ImportReport};
use rlo_core::model::{Annotation, Document, Region, ResourceId, Schema};
use rlo_core::ops::{apply_script, parse_script, print_script, CurationOp, CurationScript, OpReport};
use rlo_core::store::{self, Bundle};

use crate::{
    artifact_path, blocking, canonical_json, check_version, mutate, ApiError, AppState, Entry,
    ExportJob, JobState,
};

/// Uploaded stores and export artifacts can be large.
const BODY_LIMIT: usize = 512 << 20;
const DEFAULT_PAGE_SIZE: usize = 20;
const MAX_PAGE_SIZE: usize = 500;

pub(crate) fn router(state: AppState) -> Router {
    Router::new()
        .route("/collections", post(create).get(list))
        .route("/collections/{id}", get(handle))
        .route("/collections/{id}/store", get(download_store))
        .route("/collections/{id}/import", post(run_import))
        .route("/collections/{id}/schema", get(schema))
        .route("/collections/{id}/schema/ops", post(schema_ops))
        .route("/collections/{id}/documents", get(documents))
        .route("/collections/{id}/documents/{doc}", get(document).patch(patch_document))
        .route("/collections/{id}/annotations", post(add_annotation).get(annotations))
        .route("/collections/{id}/exports", post(start_export))
        .route("/collections/{id}/exports/{job}", get(job))
        .route("/collections/{id}/exports/{job}/artifact", get(artifact))
        .route("/collections/{id}/log", get(curation_log))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

// --- helpers ---

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let s = v.to_str().map_err(|_| ApiError::bad_request("unreadable If-Match"))?.trim();
    let s = s.strip_prefix("W/").unwrap_or(s).trim_matches('"');
    s.parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request(format!("If-Match must be a version number, got {s:?}")))
}

fn require_if_match(headers: &HeaderMap) -> Result<u64, ApiError> {
    if_match(headers)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "precondition-required",
            "this request needs an If-Match header with the current version",
        )
    })
}

fn with_etag(mut r: Response, version: u64) -> Response {
    if let Ok(v) = HeaderValue::from_str(&format!("\"{version}\"")) {
        r.headers_mut().insert(header::ETAG, v);
    }
    r
}

fn zip_response(bytes: Vec<u8>, file_name: &str) -> Response {
    (
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{file_name}\"")),
        ],
        bytes,
    )
        .into_response()
}

#[derive(Serialize)]
struct HandleBody {
    id: String,
    version: u64,
    path: String,
    documents: usize,
    element_types: usize,
}

fn handle_body(e: &Entry) -> HandleBody {
    let b = e.snapshot();
    HandleBody {
        id: e.id.clone(),
        version: b.collection.version(),
        path: e.path.display().to_string(),
        documents: b.collection.documents.len(),
        element_types: b.collection.schema.type_count(),
    }
}

// --- collections ---

async fn create(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let bundle = if body.is_empty() {
        Bundle::default()
    } else {
        blocking(move || store::from_zip(&body).map_err(ApiError::from)).await?
    };
    let entry = state.create(bundle).await?;
    let version = entry.snapshot().collection.version();
    Ok(with_etag(canonical_json(StatusCode::CREATED, &handle_body(&entry)), version))
}

async fn list(State(state): State<AppState>) -> Response {
    let all: Vec<HandleBody> = state.list().iter().map(|e| handle_body(e)).collect();
    canonical_json(StatusCode::OK, &all)
}

async fn handle(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let e = state.get(&id)?;
    let body = handle_body(&e);
    let v = body.version;
    Ok(with_etag(canonical_json(StatusCode::OK, &body), v))
}

async fn download_store(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.get(&id)?.snapshot();
    let bytes = blocking(move || store::to_zip(&snap).map_err(ApiError::from)).await?;
    Ok(zip_response(bytes, &format!("{id}.clv")))
}

// --- import ---

#[derive(Deserialize)]
struct ImportRequest {
    plugin: String,
    #[serde(default)]
    params: BTreeMap<String, Value>,
}

#[derive(Serialize)]
struct ImportResponse {
    version: u64,
    report: ImportReport,
}

async fn run_import(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let req: ImportRequest = parse_json(&body)?;
    let fixture = state.0.config.fixture.clone();
    let dir = entry.path.clone();
    let (head, report) = mutate(&entry, if_match(&headers)?, move |head| {
        let mut params = ImportParams::new();
        for (k, v) in &req.params {
            params = match v {
                Value::String(s) => params.with(k, s),
                other => params.with(k, other),
            };
        }
        if let (Some(f), "medpix", None) = (&fixture, req.plugin.as_str(), params.get("base_url")) {
            params = params.with("base_url", f.display());
        }
        params.cursor = store::read_cursor(&dir)?;
        let (next, report) = import(&req.plugin, &params, head)?;
        store::write_cursor(&dir, report.cursor.as_ref())?;
        Ok((next, report))
    })
    .await?;
    let version = head.collection.version();
    Ok(with_etag(canonical_json(StatusCode::OK, &ImportResponse { version, report }), version))
}

// --- schema ---

#[derive(Serialize)]
struct SchemaBody<'a> {
    version: u64,
    element_types: usize,
    schema: &'a Schema,
}

async fn schema(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let b = state.get(&id)?.snapshot();
    let c = &b.collection;
    let body = SchemaBody {
        version: c.version(),
        element_types: c.schema.type_count(),
        schema: &c.schema,
    };
    Ok(with_etag(canonical_json(StatusCode::OK, &body), c.version()))
}

#[derive(Deserialize)]
struct OpsQuery {
    #[serde(default)]
    dry_run: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OpsBody {
    List(Vec<CurationOp>),
    Wrapped { ops: Vec<CurationOp> },
}

#[derive(Serialize)]
struct OpsResponse {
    version: u64,
    element_types: usize,
    dry_run: bool,
    reports: Vec<OpReport>,
}

fn parse_ops(headers: &HeaderMap, body: &[u8]) -> Result<CurationScript, ApiError> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    if is_json {
        let ops = match parse_json::<OpsBody>(body)? {
            OpsBody::List(ops) | OpsBody::Wrapped { ops } => ops,
        };
        Ok(CurationScript::from_ops(ops))
    } else {
        let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("script is not UTF-8"))?;
        Ok(parse_script(text)?)
    }
}

async fn schema_ops(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<OpsQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let expected = require_if_match(&headers)?;
    let script = parse_ops(&headers, &body)?;
    if q.dry_run {
        let head = entry.snapshot();
        check_version(&head, Some(expected))?;
        let (c, reports) = blocking(move || apply_script(&head.collection, &script).map_err(ApiError::from)).await?;
        let body = OpsResponse {
            version: expected,
            element_types: c.schema.type_count(),
            dry_run: true,
            reports,
        };
        return Ok(with_etag(canonical_json(StatusCode::OK, &body), expected));
    }
    let (head, reports) = mutate(&entry, Some(expected), move |head| {
        let (c, reports) = apply_script(&head.collection, &script)?;
        Ok((Bundle::new(c, head.blobs.clone()), reports))
    })
    .await?;
    let c = &head.collection;
    let body = OpsResponse {
        version: c.version(),
        element_types: c.schema.type_count(),
        dry_run: false,
        reports,
    };
    Ok(with_etag(canonical_json(StatusCode::OK, &body), c.version()))
}

async fn curation_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let b = state.get(&id)?.snapshot();
    let text = print_script(b.collection.log.iter().map(|e| &e.op));
    let r = ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response();
    Ok(with_etag(r, b.collection.version()))
}

// --- documents ---

#[derive(Deserialize)]
struct PageQuery {
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Serialize)]
struct DocumentPage<'a> {
    page: usize,
    per_page: usize,
    total: usize,
    documents: Vec<&'a Document>,
}

async fn documents(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PageQuery>,
) -> Result<Response, ApiError> {
    let b = state.get(&id)?.snapshot();
    let page = q.page.unwrap_or(1).max(1);
    let per_page = q.per_page.unwrap_or(DEFAULT_PAGE_SIZE).clamp(1, MAX_PAGE_SIZE);
    let docs = &b.collection.documents;
    let body = DocumentPage {
        page,
        per_page,
        total: docs.len(),
        documents: docs.values().skip((page - 1) * per_page).take(per_page).collect(),
    };
    Ok(with_etag(canonical_json(StatusCode::OK, &body), b.collection.version()))
}

async fn document(
    State(state): State<AppState>,
    Path((id, doc)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let b = state.get(&id)?.snapshot();
    let d = b
        .collection
        .documents
        .get(&doc)
        .ok_or_else(|| ApiError::not_found("document", &doc))?;
    Ok(with_etag(canonical_json(StatusCode::OK, d), b.collection.version()))
}

async fn patch_document(
    State(state): State<AppState>,
    Path((id, doc)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let expected = require_if_match(&headers)?;
    let cmd: DocCommand = parse_json(&body)?;
    if !entry.snapshot().collection.documents.contains_key(&doc) {
        return Err(ApiError::not_found("document", &doc));
    }
    let doc_id = doc.clone();
    let (head, ()) = mutate(&entry, Some(expected), move |head| {
        let c = curation::apply_command(&head.collection, &doc_id, &cmd)?;
        Ok((Bundle::new(c, head.blobs.clone()), ()))
    })
    .await?;
    let d = &head.collection.documents[&doc];
    Ok(with_etag(canonical_json(StatusCode::OK, d), head.collection.version()))
}

// --- annotations ---

#[derive(Deserialize)]
struct AnnotationRequest {
    resource_id: ResourceId,
    region: Region,
    comment: String,
    #[serde(default)]
    author: String,
}

#[derive(Serialize)]
struct Created {
    id: String,
}

async fn add_annotation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let req: AnnotationRequest = parse_json(&body)?;
    let (_, ann_id) = mutate(&entry, if_match(&headers)?, move |head| {
        let (c, ann_id) =
            curation::add_annotation(&head.collection, &req.resource_id, req.region, &req.comment, &req.author)?;
        Ok((Bundle::new(c, head.blobs.clone()), ann_id))
    })
    .await?;
    Ok(canonical_json(StatusCode::CREATED, &Created { id: ann_id }))
}

#[derive(Deserialize)]
struct ResourceQuery {
    resource: Option<String>,
}

async fn annotations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ResourceQuery>,
) -> Result<Response, ApiError> {
    let b = state.get(&id)?.snapshot();
    let list: Vec<&Annotation> = b
        .collection
        .annotations
        .values()
        .filter(|a| q.resource.as_ref().is_none_or(|r| a.resource_id.as_str() == r))
        .collect();
    Ok(canonical_json(StatusCode::OK, &list))
}

// --- exports ---

#[derive(Deserialize, Default)]
struct ExportRequest {
    #[serde(default)]
    profile: ExportProfile,
}

fn set_job(entry: &Entry, job: &str, f: impl FnOnce(&mut ExportJob)) {
    if let Some(j) = entry.jobs.lock().expect("jobs lock").get_mut(job) {
        f(j);
    }
}

async fn start_export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let req: ExportRequest = if body.is_empty() {
        ExportRequest::default()
    } else {
        parse_json(&body)?
    };
    let snapshot = entry.snapshot();
    let job_id = entry.next_job_id();
    let job = ExportJob {
        id: job_id.clone(),
        profile: req.profile.clone(),
        state: JobState::Queued,
        version: snapshot.collection.version(),
        artifact: None,
        error: None,
    };
    entry.jobs.lock().expect("jobs lock").insert(job_id.clone(), job.clone());

    let dir = state.exports_dir(&id);
    let worker = entry.clone();
    let jid = job_id.clone();
    tokio::task::spawn_blocking(move || {
        set_job(&worker, &jid, |j| j.state = JobState::Running);
        let result = run_export(&snapshot, &req.profile, &dir, &jid);
        set_job(&worker, &jid, |j| match result {
            Ok(path) => {
                j.state = JobState::Done;
                j.artifact = Some(path);
            }
            Err(e) => {
                log::warn!("export {jid} failed: {e}");
                j.state = JobState::Failed;
                j.error = Some(e);
            }
        });
    });
    Ok(canonical_json(StatusCode::ACCEPTED, &job))
}

fn run_export(b: &Arc<Bundle>, profile: &ExportProfile, dir: &std::path::Path, job: &str) -> Result<String, String> {
    let bytes = export_package(b, profile).map_err(|e| format!("[{}] {e}", e.rule()))?;
    let report = validate_package(&bytes);
    if !report.is_empty() {
        return Err(format!("package failed validation: {report}"));
    }
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = artifact_path(dir, job);
    std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(path.display().to_string())
}

async fn job(
    State(state): State<AppState>,
    Path((id, job)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let jobs = entry.jobs.lock().expect("jobs lock");
    let j = jobs.get(&job).ok_or_else(|| ApiError::not_found("export job", &job))?;
    Ok(canonical_json(StatusCode::OK, j))
}

async fn artifact(
    State(state): State<AppState>,
    Path((id, job)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = state.get(&id)?;
    let j = entry
        .jobs
        .lock()
        .expect("jobs lock")
        .get(&job)
        .cloned()
        .ok_or_else(|| ApiError::not_found("export job", &job))?;
    let Some(path) = j.artifact.filter(|_| j.state == JobState::Done) else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not-ready",
            format!("export job {job} is {:?}", j.state).to_lowercase(),
        ));
    };
    let bytes = blocking(move || std::fs::read(&path).map_err(|e| ApiError::internal(e.to_string()))).await?;
    Ok(zip_response(bytes, &format!("{id}-{job}.zip")))
}
