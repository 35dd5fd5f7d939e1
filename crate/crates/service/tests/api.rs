//! End-to-end API tests against the bundled fixture, driving the router
//! in process.

use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::body::{to_bytes, Body, Bytes};
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use rlo_core::export::validate_package;
use rlo_core::import::{import, ImportParams};
use rlo_core::model::canonical_serialize;
use rlo_core::ops::{apply_script, parse_script};
use rlo_core::store::{self, Bundle};
use rlo_service::{router, AppState, Config};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn app(storage: &Path) -> Router {
    let state = AppState::open(Config {
        storage: storage.to_path_buf(),
        fixture: Some(fixtures().join("medpix")),
    })
    .unwrap();
    router(state)
}

struct Reply {
    status: StatusCode,
    headers: HeaderMap,
    body: Bytes,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {:?}", self.body))
    }
}

async fn call(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: impl Into<Body>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let resp = app.clone().oneshot(req.body(body.into()).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    Reply { status, headers, body }
}

async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, &[], Body::empty()).await
}

/// Creates a collection and imports the fixture into it.
async fn imported(app: &Router) -> String {
    let r = call(app, Method::POST, "/collections", &[], Body::empty()).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let id = r.json()["id"].as_str().unwrap().to_string();
    let r = call(
        app,
        Method::POST,
        &format!("/collections/{id}/import"),
        &[("content-type", "application/json")],
        json!({"plugin": "medpix", "params": {"rate": 0}}).to_string(),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    assert_eq!(r.json()["report"]["documents"], 12);
    id
}

fn curation_script() -> String {
    std::fs::read_to_string(fixtures().join("medpix_curation.cdsl")).unwrap()
}

#[tokio::test]
async fn schema_ops_are_version_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = imported(&app).await;

    let r = get(&app, &format!("/collections/{id}/schema")).await;
    assert_eq!(r.json()["element_types"], 88);
    let v0 = r.json()["version"].as_u64().unwrap();
    assert_eq!(r.headers[header::ETAG], format!("\"{v0}\"").as_str());
    let ops = format!("/collections/{id}/schema/ops");

    // no If-Match
    let r = call(&app, Method::POST, &ops, &[], "rename /Cases/Sex as Gender").await;
    assert_eq!(r.status, StatusCode::PRECONDITION_REQUIRED);
    // stale If-Match
    let stale = (v0 + 5).to_string();
    let r = call(&app, Method::POST, &ops, &[("if-match", &stale)], "rename /Cases/Sex as Gender").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"]["rule"], "stale-version");
    assert_eq!(get(&app, &format!("/collections/{id}/schema")).await.json()["version"], v0);
    // domain error carries rule and path
    let cur = v0.to_string();
    let r = call(&app, Method::POST, &ops, &[("if-match", &cur)], "remove /Cases/Nope").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["rule"], "unknown-path");
    assert_eq!(r.json()["error"]["path"], "/Cases/Nope");
    // a parse error names the line
    let r = call(&app, Method::POST, &ops, &[("if-match", &cur)], "rename\n").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["rule"], "parse-error");
    // dry run leaves the version alone
    let r = call(&app, Method::POST, &format!("{ops}?dry_run=true"), &[("if-match", &cur)], curation_script()).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["element_types"], 33);
    assert_eq!(get(&app, &format!("/collections/{id}/schema")).await.json()["version"], v0);
    // JSON op list
    let body = json!([{"op": "rename", "path": "/Cases/Sex", "new_name": "Gender"}]).to_string();
    let r = call(&app, Method::POST, &ops, &[("if-match", &cur), ("content-type", "application/json")], body).await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    assert_eq!(r.json()["version"], v0 + 1);
}

#[tokio::test]
async fn concurrent_writers_with_one_version_get_one_success() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = imported(&app).await;
    let v = get(&app, &format!("/collections/{id}/schema")).await.json()["version"].as_u64().unwrap();
    let names = ["A1", "A2", "A3", "A4", "A5", "A6"];
    let mut tasks = Vec::new();
    for n in names {
        let app = app.clone();
        let uri = format!("/collections/{id}/schema/ops");
        let v = v.to_string();
        tasks.push(tokio::spawn(async move {
            call(&app, Method::POST, &uri, &[("if-match", &v)], format!("rename /Cases/Age as {n}")).await.status
        }));
    }
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            s => assert_eq!(s, StatusCode::CONFLICT),
        }
    }
    assert_eq!(ok, 1);
    assert_eq!(get(&app, &format!("/collections/{id}/schema")).await.json()["version"], v + 1);
}

#[tokio::test]
async fn log_replays_to_the_head_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = imported(&app).await;
    let v = get(&app, &format!("/collections/{id}")).await.json()["version"].as_u64().unwrap();
    let r = call(
        &app,
        Method::POST,
        &format!("/collections/{id}/schema/ops"),
        &[("if-match", &v.to_string())],
        curation_script(),
    )
    .await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["element_types"], 33);

    let log = get(&app, &format!("/collections/{id}/log")).await;
    assert!(log.headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/plain"));
    let text = String::from_utf8(log.body.to_vec()).unwrap();
    let replayed = parse_script(&text).unwrap();
    assert_eq!(replayed.ops, parse_script(&curation_script()).unwrap().ops);

    let head = get(&app, &format!("/collections/{id}/store")).await;
    assert_eq!(head.headers[header::CONTENT_TYPE], "application/zip");
    let head = store::from_zip(&head.body).unwrap();

    let params = ImportParams::new()
        .with("base_url", fixtures().join("medpix").display())
        .with("rate", 0);
    let fresh = import("medpix", &params, &Bundle::default()).unwrap().0;
    let (c, _) = apply_script(&fresh.collection, &replayed).unwrap();
    assert_eq!(canonical_serialize(&c).unwrap(), canonical_serialize(&head.collection).unwrap());
}

#[tokio::test]
async fn documents_page_read_and_patch() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = imported(&app).await;
    let r = get(&app, &format!("/collections/{id}/documents?page=2&per_page=5")).await;
    let page = r.json();
    assert_eq!(page["total"], 18);
    assert_eq!(page["documents"].as_array().unwrap().len(), 5);
    assert_eq!(page["documents"][0]["id"], "MPX1006");

    let doc = format!("/collections/{id}/documents/MPX1004");
    let r = get(&app, &doc).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.headers[header::ETAG].to_str().unwrap().to_string();

    let set = json!({"command": "set", "path": "/Cases/Findings", "text": "Transverse fracture"}).to_string();
    let r = call(&app, Method::PATCH, &doc, &[], set.clone()).await;
    assert_eq!(r.status, StatusCode::PRECONDITION_REQUIRED);
    let r = call(&app, Method::PATCH, &doc, &[("if-match", &v)], set).await;
    assert_eq!(r.status, StatusCode::OK, "{:?}", r.body);
    assert!(r.body.windows(19).any(|w| w == b"Transverse fracture"));

    let bad = json!({"command": "set", "path": "/Cases/Images", "text": "x"}).to_string();
    let r = call(&app, Method::PATCH, &doc, &[("if-match", &v)], bad).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["rule"], "non-atomic");
    assert_eq!(r.json()["error"]["path"], "/Cases/Images");

    assert_eq!(get(&app, &format!("/collections/{id}/documents/NOPE")).await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/collections/c999/schema").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn annotations_are_listed_per_resource() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = imported(&app).await;
    let doc = get(&app, &format!("/collections/{id}/documents/MPX1004")).await.json();
    let text = doc.to_string();
    // the image reference is the only resource id in the foot case
    let store = store::from_zip(&get(&app, &format!("/collections/{id}/store")).await.body).unwrap();
    let rid = store
        .collection
        .resources
        .keys()
        .find(|r| text.contains(r.as_str()))
        .unwrap()
        .to_string();
    let body = json!({"resource_id": rid, "region": {"x": 5, "y": 5, "w": 20, "h": 20}, "comment": "fracture", "author": "tutor"});
    let uri = format!("/collections/{id}/annotations");
    let r = call(&app, Method::POST, &uri, &[], body.to_string()).await;
    assert_eq!(r.status, StatusCode::CREATED, "{:?}", r.body);
    let ann = r.json()["id"].as_str().unwrap().to_string();
    let list = get(&app, &format!("{uri}?resource={rid}")).await.json();
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["id"], ann.as_str());
    assert_eq!(get(&app, &format!("{uri}?resource=other")).await.json().as_array().unwrap().len(), 0);

    let out = json!({"resource_id": rid, "region": {"x": 380, "y": 5, "w": 20, "h": 20}, "comment": "edge"});
    let r = call(&app, Method::POST, &uri, &[], out.to_string()).await;
    assert_eq!(r.json()["error"]["rule"], "out-of-bounds");
}

#[tokio::test]
async fn export_jobs_produce_valid_packages() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = imported(&app).await;
    let body = json!({"profile": {"format": "scorm12", "include_quizzes": true, "fixed_epoch": 0}});
    let r = call(&app, Method::POST, &format!("/collections/{id}/exports"), &[], body.to_string()).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let job = r.json()["id"].as_str().unwrap().to_string();
    let uri = format!("/collections/{id}/exports/{job}");
    let mut state = String::new();
    for _ in 0..200 {
        state = get(&app, &uri).await.json()["state"].as_str().unwrap().to_string();
        if state == "done" || state == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    assert_eq!(state, "done");
    let r = get(&app, &format!("{uri}/artifact")).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[header::CONTENT_TYPE], "application/zip");
    assert!(validate_package(&r.body).is_empty());

    // a bad profile fails the job, not the request
    let bad = json!({"profile": {"selection": ["/Cases/Nope"]}});
    let r = call(&app, Method::POST, &format!("/collections/{id}/exports"), &[], bad.to_string()).await;
    let job = r.json()["id"].as_str().unwrap().to_string();
    let uri = format!("/collections/{id}/exports/{job}");
    for _ in 0..200 {
        if get(&app, &uri).await.json()["state"] == "failed" {
            break;
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    let j = get(&app, &uri).await.json();
    assert_eq!(j["state"], "failed");
    assert!(j["error"].as_str().unwrap().contains("unknown-path"));
    assert_eq!(get(&app, &format!("{uri}/artifact")).await.status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn uploads_and_restarts_keep_collections() {
    let dir = tempfile::tempdir().unwrap();
    let storage = dir.path().join("storage");
    let id = {
        let app = app(&storage);
        let id = imported(&app).await;
        let v = get(&app, &format!("/collections/{id}")).await.json()["version"].to_string();
        let r = call(&app, Method::POST, &format!("/collections/{id}/schema/ops"), &[("if-match", &v)], "remove /Cases/Race").await;
        assert_eq!(r.status, StatusCode::OK);
        id
    };
    let app = app(&storage);
    let h = get(&app, &format!("/collections/{id}")).await.json();
    assert_eq!(h["element_types"], 87);
    assert_eq!(h["documents"], 18);

    // a downloaded store uploads as a new collection
    let zip = get(&app, &format!("/collections/{id}/store")).await.body;
    let r = call(&app, Method::POST, "/collections", &[], zip).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_ne!(r.json()["id"], id.as_str());
    assert_eq!(r.json()["element_types"], 87);

    let r = call(&app, Method::POST, "/collections", &[], "garbage").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}
