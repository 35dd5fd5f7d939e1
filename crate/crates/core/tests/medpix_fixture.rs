//! Fixture-level checks of the MedPix importer and the bundled curation
//! script.

use std::path::{Path, PathBuf};

use rlo_core::import::{import, ImportParams};
use rlo_core::model::{canonical_serialize, validate_collection, ElementKind, Multiplicity, Payload};
use rlo_core::ops::{apply_script, parse_script};
use rlo_core::store::Bundle;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn medpix_params() -> ImportParams {
    ImportParams::new()
        .with("base_url", fixtures().join("medpix").display())
        .with("rate", 0)
}

fn fresh_import() -> Bundle {
    import("medpix", &medpix_params(), &Bundle::default()).unwrap().0
}

#[test]
fn imports_twelve_cases_and_their_topics() {
    let (b, report) = import("medpix", &medpix_params(), &Bundle::default()).unwrap();
    assert_eq!(report.documents, 12);
    assert_eq!(report.auxiliary_documents, 6);
    assert_eq!(report.skipped, 0);
    assert_eq!(report.errors, 0);
    assert!(report.interrupted.is_none());
    assert_eq!(b.collection.documents.len(), 18);
    assert!(validate_collection(&b.collection).is_empty());
}

#[test]
fn inferred_schema_has_88_types() {
    let b = fresh_import();
    assert_eq!(b.collection.schema.type_count(), 88);
    let s = &b.collection.schema;
    let get = |p: &str| s.get(&p.parse().unwrap()).unwrap();
    assert_eq!(get("/Cases/Images").multiplicity, Multiplicity::Many);
    assert_eq!(get("/Cases/Images/File").kind, ElementKind::ResourceRef);
    assert_eq!(get("/Cases/Topics").kind, ElementKind::Link);
    assert_eq!(get("/Cases/Quiz").kind, ElementKind::Quiz);
    assert_eq!(get("/Cases/Quiz").multiplicity, Multiplicity::Many);
    assert_eq!(get("/Cases/FollowUp").multiplicity, Multiplicity::Optional);
    assert_eq!(get("/Cases/Sex").multiplicity, Multiplicity::One);
    assert_eq!(get("/Topic/ExternalLinks").kind, ElementKind::Link);
}

#[test]
fn identical_images_are_stored_once() {
    let b = fresh_import();
    // 13 image files, two of them byte-identical
    assert_eq!(b.collection.resources.len(), 12);
    assert_eq!(b.blobs.len(), 12);
    let file = |doc: &str| {
        b.collection.documents[doc]
            .instances()
            .into_iter()
            .find_map(|i| match &i.payload {
                Payload::Resource(id) => Some(id.clone()),
                _ => None,
            })
            .unwrap()
    };
    assert_eq!(file("MPX1007"), file("MPX1008"));
    assert_ne!(file("MPX1001"), file("MPX1004"));
}

#[test]
fn foot_case_carries_one_four_choice_mcq() {
    let b = fresh_import();
    let doc = &b.collection.documents["MPX1004"];
    let quizzes: Vec<_> = doc
        .instances()
        .into_iter()
        .filter_map(|i| match &i.payload {
            Payload::Quiz(q) => Some(q.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(quizzes.len(), 1);
    assert_eq!(quizzes[0].choices.len(), 4);
    assert!(quizzes[0].stem.contains("foot"));
}

#[test]
fn max_cases_limits_everything_it_references() {
    let params = medpix_params().with("max_cases", 1);
    let (b, report) = import("medpix", &params, &Bundle::default()).unwrap();
    assert_eq!(report.documents, 1);
    // MPX1001 links one topic, carries two questions and one image
    assert_eq!(report.auxiliary_documents, 1);
    assert_eq!(b.collection.resources.len(), 1);
    assert!(validate_collection(&b.collection).is_empty());
}

#[test]
fn import_is_deterministic() {
    let a = canonical_serialize(&fresh_import().collection).unwrap();
    let b = canonical_serialize(&fresh_import().collection).unwrap();
    assert_eq!(a, b);
}

#[test]
fn curation_script_reduces_to_33() {
    let b = fresh_import();
    let text = std::fs::read_to_string(fixtures().join("medpix_curation.cdsl")).unwrap();
    let script = parse_script(&text).unwrap();
    let (c, reports) = apply_script(&b.collection, &script).unwrap();
    assert_eq!(c.schema.type_count(), 33);
    assert_eq!(reports.len(), script.ops.len());
    assert!(validate_collection(&c).is_empty());
    let pd = c.schema.get(&"/Cases/Personal Data".parse().unwrap()).unwrap();
    let kids: Vec<_> = pd.children.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(kids, ["Sex", "Age"]);
    assert_eq!(c.version(), script.ops.len() as u64);
}
