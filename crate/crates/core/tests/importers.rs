//! Importer plugins against real inputs: CSV tables, a directory of JSON and
//! XML files, and the REST client talking to a local HTTP server.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rlo_core::import::{import, ImportParams};
use rlo_core::model::{validate_collection, ElementKind, LinkKind, Multiplicity, Payload};
use rlo_core::store::Bundle;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn table_rows_become_flat_documents() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cases.csv");
    std::fs::write(
        &csv,
        "Id,Diagnosis,Age,Notes\n\
         c1,Jones fracture,34,left foot\n\
         c2,Pneumothorax,61,\n\
         c3,Appendicitis,19,\"rebound, guarding\"\n\
         c4,Osteosarcoma,15,knee\n\
         c5,Pneumonia,72,RLL\n",
    )
    .unwrap();
    let params = ImportParams::new()
        .with("path", csv.display())
        .with("id_column", "Id");
    let (b, report) = import("table", &params, &Bundle::default()).unwrap();
    assert_eq!(report.documents, 5);
    assert_eq!(report.skipped, 0);
    let c = &b.collection;
    assert!(validate_collection(c).is_empty());
    let names: Vec<_> = c.schema.root.children.iter().map(|t| t.name.as_str()).collect();
    // the id column stays as content
    assert_eq!(names, ["Id", "Diagnosis", "Age", "Notes"]);
    assert!(c.schema.root.children.iter().all(|t| t.kind == ElementKind::Atomic));
    assert_eq!(c.documents["c3"].instances().len(), 4);
    let notes = c.documents["c3"].instances_of(&"/Notes".parse().unwrap());
    assert_eq!(notes[0].payload, Payload::Text("rebound, guarding".into()));
    // the empty cell is absent, so the type is optional
    assert_eq!(c.schema.root.child("Notes").unwrap().multiplicity, Multiplicity::Optional);
    assert_eq!(c.documents["c2"].instances().len(), 3);
}

#[test]
fn files_plugin_reads_json_xml_and_resources() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::copy(fixtures().join("medpix/images/mpx1004-1.png"), d.join("foot.png")).unwrap();
    std::fs::write(
        d.join("foot.json"),
        r#"{"Title": "Foot pain", "Image": {"$resource": "foot.png"},
            "See": {"$document": "knee"}, "Quiz": {"$quiz": {"stem": "Which bone?",
            "choices": ["Fifth metatarsal", "Talus"], "answer": 0}}}"#,
    )
    .unwrap();
    std::fs::write(
        d.join("knee.json"),
        r#"{"Title": "Knee swelling", "Ref": {"$url": "https://example.org/knee"}}"#,
    )
    .unwrap();
    std::fs::write(
        d.join("notes.xml"),
        r#"<case lang="en"><Title>Shoulder</Title><Finding>Bankart lesion</Finding><Finding>Hill-Sachs</Finding></case>"#,
    )
    .unwrap();
    let params = ImportParams::new().with("path", d.display());
    let (b, report) = import("files", &params, &Bundle::default()).unwrap();
    assert_eq!(report.documents, 3);
    assert_eq!(report.resources, 1);
    let c = &b.collection;
    assert!(validate_collection(c).is_empty(), "{}", validate_collection(c));
    let kind = |p: &str| c.schema.get(&p.parse().unwrap()).unwrap().kind;
    assert_eq!(kind("/Image"), ElementKind::ResourceRef);
    assert_eq!(kind("/See"), ElementKind::Link);
    assert_eq!(kind("/Quiz"), ElementKind::Quiz);
    // the XML document element is the single top-level field
    assert_eq!(c.schema.get(&"/case/Finding".parse().unwrap()).unwrap().multiplicity, Multiplicity::Many);
    assert_eq!(kind("/case/lang"), ElementKind::Atomic);
    let res = c.resources.values().next().unwrap();
    assert_eq!(res.image.map(|s| (s.width, s.height)), Some((384, 320)));
    assert_eq!(b.blobs.len(), 1);
    let see = c.documents["foot"].instances_of(&"/See".parse().unwrap());
    assert!(matches!(&see[0].payload, Payload::Link(l) if l.kind == LinkKind::InternalDocument && l.value == "knee"));
}

// --- local HTTP server over the fixture tree ---

struct Server {
    base: String,
    hits: Arc<Mutex<Vec<(String, Instant)>>>,
}

/// Serves `root`; `faults` maps a request path to the status to return
/// instead of the file.
fn serve(root: PathBuf, faults: BTreeMap<String, u16>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/", listener.local_addr().unwrap());
    let hits = Arc::new(Mutex::new(Vec::new()));
    let log = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let root = root.clone();
            let faults = faults.clone();
            let log = log.clone();
            std::thread::spawn(move || handle(stream, &root, &faults, &log));
        }
    });
    Server { base, hits }
}

fn handle(
    mut stream: TcpStream,
    root: &Path,
    faults: &BTreeMap<String, u16>,
    log: &Mutex<Vec<(String, Instant)>>,
) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).is_err() {
        return;
    }
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).unwrap_or(0) == 0 || h == "\r\n" {
            break;
        }
    }
    let path = line.split_whitespace().nth(1).unwrap_or("/").trim_start_matches('/').to_string();
    log.lock().unwrap().push((path.clone(), Instant::now()));
    let (status, body) = match faults.get(&path) {
        Some(&s) => (s, b"fault".to_vec()),
        None => match std::fs::read(root.join(&path)) {
            Ok(b) => (200, b),
            Err(_) => (404, b"not found".to_vec()),
        },
    };
    let head = format!(
        "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(&body);
}

fn medpix_root() -> PathBuf {
    fixtures().join("medpix")
}

#[test]
fn http_import_matches_file_import() {
    let server = serve(medpix_root(), BTreeMap::new());
    let params = ImportParams::new().with("base_url", &server.base).with("rate", 0);
    let (http, report) = import("medpix", &params, &Bundle::default()).unwrap();
    assert_eq!(report.documents, 12);
    let files = ImportParams::new().with("base_url", medpix_root().display()).with("rate", 0);
    let (local, _) = import("medpix", &files, &Bundle::default()).unwrap();
    assert_eq!(http.collection.schema, local.collection.schema);
    assert_eq!(
        http.collection.documents.keys().collect::<Vec<_>>(),
        local.collection.documents.keys().collect::<Vec<_>>()
    );
    assert_eq!(http.blobs.len(), local.blobs.len());
}

#[test]
fn requests_respect_the_rate_limit() {
    let server = serve(medpix_root(), BTreeMap::new());
    let params = ImportParams::new()
        .with("base_url", &server.base)
        .with("rate", 20)
        .with("max_cases", 2);
    import("medpix", &params, &Bundle::default()).unwrap();
    let mut times: Vec<Instant> = server.hits.lock().unwrap().iter().map(|(_, t)| *t).collect();
    times.sort();
    assert!(times.len() >= 5);
    // 20 requests per second: at least 50 ms between starts, less jitter
    let span = *times.last().unwrap() - times[0];
    let min = Duration::from_millis(50 * (times.len() as u64 - 1) * 9 / 10);
    assert!(span >= min, "{} requests in {span:?}", times.len());
}

#[test]
fn client_errors_skip_the_record() {
    let faults = BTreeMap::from([("cases/MPX1003.json".to_string(), 404)]);
    let server = serve(medpix_root(), faults);
    let params = ImportParams::new().with("base_url", &server.base).with("rate", 0);
    let (b, report) = import("medpix", &params, &Bundle::default()).unwrap();
    assert_eq!(report.documents, 11);
    assert_eq!(report.skipped, 1);
    assert!(report.interrupted.is_none());
    assert!(!b.collection.documents.contains_key("MPX1003"));
}

#[test]
fn server_errors_interrupt_and_the_cursor_resumes() {
    let faults = BTreeMap::from([("cases/MPX1006.json".to_string(), 503)]);
    let server = serve(medpix_root(), faults);
    let params = ImportParams::new().with("base_url", &server.base).with("rate", 0);
    let (partial, report) = import("medpix", &params, &Bundle::default()).unwrap();
    assert!(report.interrupted.is_some());
    let cursor = report.cursor.clone().expect("interrupted runs leave a cursor");
    assert_eq!(report.documents, 11);
    assert!(!partial.collection.documents.contains_key("MPX1006"));
    assert!(validate_collection(&partial.collection).is_empty());

    // the source recovers (a fresh server on a new port); the cursor is
    // tied to its base URL, so carry it over
    let server2 = serve(medpix_root(), BTreeMap::new());
    let mut cursor = cursor;
    cursor["base_url"] = server2.base.clone().into();
    let mut resume = ImportParams::new().with("base_url", &server2.base).with("rate", 0);
    resume.cursor = Some(cursor);
    let (full, report2) = import("medpix", &resume, &partial).unwrap();
    assert!(report2.interrupted.is_none());
    assert!(report2.cursor.is_none());
    assert_eq!(report2.documents, 1);
    assert_eq!(full.collection.documents.len(), 18);
    let case_fetches = server2
        .hits
        .lock()
        .unwrap()
        .iter()
        .filter(|(p, _)| p.starts_with("cases/MPX"))
        .count();
    assert_eq!(case_fetches, 1);
    assert!(validate_collection(&full.collection).is_empty());
}

#[test]
fn unreachable_source_is_an_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let params = ImportParams::new().with("base_url", base).with("rate", 0);
    let err = import("medpix", &params, &Bundle::default()).unwrap_err();
    assert_eq!(err.rule(), "unreachable");
}
