//! Golden tests: every command gives the same result as the library call it
//! wraps, and failures map to the documented exit codes.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rlo_core::curation::{add_annotation, apply_command, DocCommand};
use rlo_core::export::{export_package, validate_package, ExportProfile, PackageFormat};
use rlo_core::import::{import, ImportParams};
use rlo_core::model::{to_canonical, ElementPath, InstancePath, LinkTarget, Payload, Region, ResourceId};
use rlo_core::ops::{apply_script, parse_script};
use rlo_core::store::{self, Bundle, StoreLock};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn medpix() -> PathBuf {
    fixtures().join("medpix")
}

fn rlo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlo")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rlo(args);
    assert!(
        out.status.success(),
        "rlo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    rlo(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file of a directory store, by relative path.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn library_import() -> Bundle {
    let params = ImportParams::new().with("base_url", medpix().display());
    import("medpix", &params, &Bundle::default()).unwrap().0
}

fn cli_import(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    ok(&["import", "--plugin", "medpix", "--base-url", s(&medpix()), s(&out)]);
    out
}

fn canon<T: serde::Serialize>(v: &T) -> String {
    String::from_utf8(to_canonical(v).unwrap()).unwrap()
}

#[test]
fn import_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cli = cli_import(dir.path(), "cli.clv");
    let lib = dir.path().join("lib.clv");
    store::save(&lib, &library_import()).unwrap();
    assert_eq!(tree(&cli), tree(&lib));

    let porcelain = ok(&["--porcelain", "import", "--plugin", "medpix", "--base-url", s(&medpix()), s(&dir.path().join("p.clv"))]);
    let params = ImportParams::new().with("base_url", medpix().display());
    let report = import("medpix", &params, &Bundle::default()).unwrap().1;
    assert_eq!(porcelain, canon(&report));
}

#[test]
fn schema_show_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let c = cli_import(dir.path(), "c.clv");
    let text = ok(&["schema", "show", s(&c)]);
    assert!(text.ends_with("element types: 88\n"));
    assert!(text.contains("/Cases/Images/File  resource-ref  one\n"));
    assert_eq!(text.lines().count(), 89);

    let b = library_import();
    let json: serde_json::Value = serde_json::from_str(&ok(&["--porcelain", "schema", "show", s(&c)])).unwrap();
    assert_eq!(json["element_types"], 88);
    assert_eq!(json["version"], 0);
    assert_eq!(json["schema"], serde_json::to_value(&b.collection.schema).unwrap());
}

#[test]
fn schema_apply_matches_library_and_dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let c = cli_import(dir.path(), "c.clv");
    let script_path = fixtures().join("medpix_curation.cdsl");
    let before = tree(&c);
    let dry = ok(&["schema", "apply", s(&c), s(&script_path), "--dry-run"]);
    assert!(dry.contains("[0] ok  group /Cases/Sex, /Cases/Age as \"Personal Data\""));
    assert!(dry.contains("element types: 33\n"));
    assert_eq!(tree(&c), before);

    let porcelain = ok(&["--porcelain", "schema", "apply", s(&c), s(&script_path)]);
    let script = parse_script(&std::fs::read_to_string(&script_path).unwrap()).unwrap();
    let b = library_import();
    let (curated, reports) = apply_script(&b.collection, &script).unwrap();
    let json: serde_json::Value = serde_json::from_str(&porcelain).unwrap();
    assert_eq!(json["reports"], serde_json::to_value(&reports).unwrap());
    assert_eq!(json["element_types"], 33);
    assert_eq!(json["dry_run"], false);

    let lib = dir.path().join("lib.clv");
    store::save(&lib, &Bundle::new(curated, b.blobs)).unwrap();
    assert_eq!(tree(&c), tree(&lib));
}

#[test]
fn failing_script_is_a_domain_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let c = cli_import(dir.path(), "c.clv");
    let script = dir.path().join("bad.cdsl");
    std::fs::write(&script, "rename /Cases/Sex as Gender\nremove /Cases/Nope\n").unwrap();
    let before = tree(&c);
    let out = rlo(&["schema", "apply", s(&c), s(&script)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[0] ok  rename /Cases/Sex as Gender"), "{err}");
    assert!(err.contains("unknown-path: op 1 failed"), "{err}");
    assert_eq!(tree(&c), before);

    std::fs::write(&script, "frobnicate /Cases\n").unwrap();
    assert_eq!(code(&["schema", "apply", s(&c), s(&script)]), 1);
}

#[test]
fn doc_commands_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let c = cli_import(dir.path(), "c.clv");
    let mut b = library_import();
    let lib = dir.path().join("lib.clv");

    let set = ok(&["--porcelain", "doc", "set", s(&c), "MPX1004", "/Cases/Findings", "Transverse", "fracture"]);
    let cmd = DocCommand::Set {
        path: "/Cases/Findings".parse().unwrap(),
        text: "Transverse fracture".into(),
    };
    b.collection = apply_command(&b.collection, "MPX1004", &cmd).unwrap();
    assert_eq!(set, canon(&b.collection.documents["MPX1004"]));

    ok(&["doc", "insert", s(&c), "MPX1004", "/Cases/Keywords", "metatarsal"]);
    let cmd = DocCommand::Insert {
        parent: "/Cases".parse().unwrap(),
        type_path: "/Cases/Keywords".parse().unwrap(),
        payload: Payload::Text("metatarsal".into()),
    };
    b.collection = apply_command(&b.collection, "MPX1004", &cmd).unwrap();

    ok(&["doc", "link", s(&c), "MPX1004", "/Cases", "doc:MPX1005"]);
    let cmd = DocCommand::Link {
        parent: InstancePath::root().child("Cases", 0),
        target: LinkTarget::document("MPX1005"),
    };
    b.collection = apply_command(&b.collection, "MPX1004", &cmd).unwrap();

    store::save(&lib, &b).unwrap();
    assert_eq!(tree(&c), tree(&lib));

    // domain errors leave the store alone
    let before = tree(&c);
    assert_eq!(code(&["doc", "set", s(&c), "MPX1004", "/Cases/Images", "x"]), 1);
    assert_eq!(code(&["doc", "set", s(&c), "NOPE", "/Cases/Findings", "x"]), 1);
    assert_eq!(code(&["doc", "link", s(&c), "MPX1004", "/Cases", "doc:NOPE"]), 1);
    assert_eq!(code(&["doc", "insert", s(&c), "MPX1004", "/Cases/Findings", "again"]), 1);
    assert_eq!(tree(&c), before);
}

#[test]
fn annotate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let c = cli_import(dir.path(), "c.clv");
    let b = library_import();
    let rid: ResourceId = b.collection.resources.keys().next().unwrap().clone();
    let out = ok(&["annotate", s(&c), &rid.0, "--rect", "10,10,40,30", "--comment", "fracture line"]);
    let region: Region = "10,10,40,30".parse().unwrap();
    let (lib, id) = add_annotation(&b.collection, &rid, region, "fracture line", "").unwrap();
    assert_eq!(out, format!("{id}\n"));
    let lib_path = dir.path().join("lib.clv");
    store::save(&lib_path, &Bundle::new(lib, b.blobs)).unwrap();
    assert_eq!(tree(&c), tree(&lib_path));

    assert_eq!(code(&["annotate", s(&c), &rid.0, "--rect", "0,0,9999,10", "--comment", "x"]), 1);
    assert_eq!(code(&["annotate", s(&c), &rid.0, "--rect", "1,2,3", "--comment", "x"]), 2);
}

#[test]
fn export_and_validate_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let c = cli_import(dir.path(), "c.clv");
    let b = library_import();
    let out = dir.path().join("out.zip");
    ok(&[
        "export", s(&c), "--format", "scorm12", "--select", "/Cases/Findings,/Cases/Diagnosis", "--quizzes",
        "--epoch", "0", "-o", s(&out),
    ]);
    let profile = ExportProfile {
        format: PackageFormat::Scorm12,
        selection: vec!["/Cases/Findings".parse().unwrap(), "/Cases/Diagnosis".parse::<ElementPath>().unwrap()],
        include_quizzes: true,
        fixed_epoch: Some(0),
        ..ExportProfile::default()
    };
    let bytes = export_package(&b, &profile).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), bytes);

    assert_eq!(ok(&["validate", s(&out)]), "valid package\n");
    let json = ok(&["--porcelain", "validate", s(&out)]);
    assert_eq!(json, canon(&serde_json::json!({"target": "package", "valid": true, "violations": validate_package(&bytes)})));
    assert_eq!(ok(&["validate", s(&c)]), "valid collection\n");

    // a package with a dangling href is reported and fails
    let broken = dir.path().join("broken.zip");
    let mut z = zip::ZipWriter::new(std::fs::File::create(&broken).unwrap());
    z.start_file("imsmanifest.xml", zip::write::SimpleFileOptions::default()).unwrap();
    z.write_all(
        br#"<manifest identifier="M"><organizations/><resources><resource identifier="R" type="webcontent" href="gone.html"><file href="gone.html"/></resource></resources></manifest>"#,
    )
    .unwrap();
    z.finish().unwrap();
    let out = rlo(&["validate", s(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dangling-href"));

    assert_eq!(code(&["export", s(&c), "--format", "imscp", "--select", "/Nope", "-o", s(&dir.path().join("x.zip"))]), 1);
    assert_eq!(code(&["export", s(&c), "--format", "imscp", "--detail", "summary", "-o", s(&dir.path().join("x.zip"))]), 1);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.clv");
    assert_eq!(code(&["schema", "show", s(&missing)]), 3);
    assert!(!dir.path().join("missing.clv.lock").exists());
    assert_eq!(code(&["schema", "show"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["import", "--plugin", "nope", s(&dir.path().join("x.clv"))]), 2);
    assert_eq!(code(&["import", "--plugin", "medpix", "--base-url", "/nonexistent/dir", s(&dir.path().join("x.clv"))]), 3);
    assert_eq!(code(&["validate", s(&missing)]), 3);

    // a held lock turns writers and readers away
    let c = cli_import(dir.path(), "c.clv");
    let lock = StoreLock::acquire(&c).unwrap();
    let out = rlo(&["schema", "show", s(&c)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
    drop(lock);
    ok(&["schema", "show", s(&c)]);
}

// --- interrupted imports ---

/// Serves the fixture over HTTP; while `failing` is set, one case answers 503.
fn flaky_server(failing: Arc<AtomicBool>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let failing = failing.clone();
            std::thread::spawn(move || respond(stream, &failing));
        }
    });
    base
}

fn respond(mut stream: TcpStream, failing: &AtomicBool) {
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
    let rel = line.split_whitespace().nth(1).unwrap_or("/").trim_start_matches('/').to_string();
    let (status, body) = if failing.load(Ordering::SeqCst) && rel == "cases/MPX1006.json" {
        ("503 Service Unavailable", Vec::new())
    } else {
        match std::fs::read(medpix().join(&rel)) {
            Ok(b) => ("200 OK", b),
            Err(_) => ("404 Not Found", Vec::new()),
        }
    };
    let head = format!("HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len());
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(&body);
}

#[test]
fn interrupted_import_exits_3_and_resumes_from_the_cursor() {
    let dir = tempfile::tempdir().unwrap();
    let failing = Arc::new(AtomicBool::new(true));
    let base = flaky_server(failing.clone());
    let c = dir.path().join("c.clv");
    let args = ["import", "--plugin", "medpix", "--base-url", &base, "--rate", "0", s(&c)];
    let out = rlo(&args);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(c.join(".import-cursor").is_file());
    let partial = store::load(&c).unwrap();
    assert!(!partial.collection.documents.contains_key("MPX1006"));
    assert_eq!(partial.collection.documents.len(), 17);

    failing.store(false, Ordering::SeqCst);
    let text = ok(&args);
    assert!(text.starts_with("imported 1 documents"), "{text}");
    assert!(!c.join(".import-cursor").exists());
    let full = store::load(&c).unwrap();
    assert_eq!(full.collection.documents.len(), 18);
    assert_eq!(full.collection.schema.type_count(), 88);
}
