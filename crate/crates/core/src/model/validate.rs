//! Collection-wide conformance checks. Violations are data, never errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::collection::Collection;
use super::document::{check_document_id, Document, ElementInstance, LinkKind, Payload};
use super::path::{check_name, ElementPath};
use super::resource::ResourceKind;
use super::schema::{ElementKind, ElementType, Schema};

pub mod rule {
    pub const SCHEMA: &str = "schema-invalid";
    pub const DOCUMENT_ID: &str = "document-id";
    pub const ROOT: &str = "root-invalid";
    pub const UNKNOWN_PATH: &str = "unknown-path";
    pub const PATH_MISMATCH: &str = "path-mismatch";
    pub const KIND_MISMATCH: &str = "kind-mismatch";
    pub const MULTIPLICITY: &str = "multiplicity";
    pub const DANGLING_RESOURCE: &str = "dangling-resource";
    pub const DANGLING_LINK: &str = "dangling-link";
    pub const BAD_URL: &str = "bad-url";
    pub const MCQ: &str = "mcq-invalid";
    pub const RESOURCE: &str = "resource-invalid";
    pub const ANNOTATION: &str = "annotation-invalid";
    pub const LOG: &str = "log-inconsistent";
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    /// Empty for collection-level findings (schema, resources, annotations).
    pub document: String,
    pub path: String,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.document.is_empty() {
            write!(f, "[{}] {}: {}", self.rule, self.path, self.message)
        } else {
            write!(
                f,
                "[{}] {} {}: {}",
                self.rule, self.document, self.path, self.message
            )
        }
    }
}

/// Ordered list of violations; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport(pub Vec<Violation>);

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.0
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.0.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, document: &str, path: impl fmt::Display, rule: &str, message: String) {
        self.0.push(Violation {
            document: document.to_string(),
            path: path.to_string(),
            rule: rule.to_string(),
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_collection(c: &Collection) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_schema(&c.schema, &mut report);
    check_resources(c, &mut report);
    check_annotations(c, &mut report);
    check_log(c, &mut report);
    for (key, doc) in &c.documents {
        if key != &doc.id {
            report.push(
                &doc.id,
                "/",
                rule::DOCUMENT_ID,
                format!("stored under key {key:?}"),
            );
        }
        check_document(c, doc, &mut report);
    }
    report.0.sort();
    report
}

pub fn check_schema(schema: &Schema, report: &mut ValidationReport) {
    if schema.root.kind != ElementKind::Composite {
        report.push("", "/", rule::SCHEMA, "root must be composite".into());
    }
    check_type_children(&schema.root, &ElementPath::root(), report);
}

fn check_type_children(node: &ElementType, path: &ElementPath, report: &mut ValidationReport) {
    let mut seen = BTreeSet::new();
    for child in &node.children {
        let cpath = path.child(child.name.clone());
        if let Err(reason) = check_name(&child.name) {
            report.push("", &cpath, rule::SCHEMA, format!("invalid name: {reason}"));
        }
        if !seen.insert(child.name.as_str()) {
            report.push("", &cpath, rule::SCHEMA, "duplicate sibling name".into());
        }
        match (child.kind, child.children.is_empty()) {
            (ElementKind::Composite, true) => {
                report.push("", &cpath, rule::SCHEMA, "composite type without children".into())
            }
            (k, false) if k != ElementKind::Composite => {
                report.push("", &cpath, rule::SCHEMA, format!("{k} type with children"))
            }
            _ => {}
        }
        check_type_children(child, &cpath, report);
    }
}

fn check_resources(c: &Collection, report: &mut ValidationReport) {
    for (key, r) in &c.resources {
        let path = format!("resource:{key}");
        if key != &r.id || !r.id.is_well_formed() {
            report.push("", &path, rule::RESOURCE, "malformed or mismatched id".into());
        }
        match r.kind {
            ResourceKind::LocalFile => {
                if r.byte_size == 0 {
                    report.push("", &path, rule::RESOURCE, "local resource is empty".into());
                }
                if r.locator.is_empty() || r.locator.starts_with('/') || r.locator.contains("..")
                {
                    report.push(
                        "",
                        &path,
                        rule::RESOURCE,
                        format!("locator {:?} is not a store-relative path", r.locator),
                    );
                }
            }
            ResourceKind::ExternalUrl => {
                if let Err(e) = check_url(&r.locator) {
                    report.push("", &path, rule::BAD_URL, e);
                }
            }
        }
    }
}

fn check_annotations(c: &Collection, report: &mut ValidationReport) {
    for (key, a) in &c.annotations {
        let path = format!("annotation:{key}");
        if key != &a.id {
            report.push("", &path, rule::ANNOTATION, "stored under a different id".into());
        }
        if a.region.w == 0 || a.region.h == 0 {
            report.push("", &path, rule::ANNOTATION, "zero-area region".into());
        }
        if a.comment.trim().is_empty() {
            report.push("", &path, rule::ANNOTATION, "empty comment".into());
        }
        match c.resources.get(&a.resource_id) {
            None => report.push(
                "",
                &path,
                rule::DANGLING_RESOURCE,
                format!("annotated resource {} missing", a.resource_id),
            ),
            Some(r) if !r.is_image() => report.push(
                "",
                &path,
                rule::ANNOTATION,
                format!("resource {} is not an image", r.id),
            ),
            Some(r) => {
                if let Some(size) = r.image {
                    if !a.region.fits(size) {
                        report.push(
                            "",
                            &path,
                            rule::ANNOTATION,
                            format!(
                                "region {} exceeds image {}x{}",
                                a.region, size.width, size.height
                            ),
                        );
                    }
                }
            }
        }
    }
}

fn check_log(c: &Collection, report: &mut ValidationReport) {
    let Some(first) = c.log.first() else {
        return;
    };
    let mut expected = first.pre_version;
    for (i, e) in c.log.iter().enumerate() {
        if e.pre_version != expected || e.post_version != e.pre_version + 1 {
            report.push(
                "",
                format!("log[{i}]"),
                rule::LOG,
                format!("versions {} -> {}", e.pre_version, e.post_version),
            );
        }
        expected = e.post_version;
    }
    if expected != c.schema.version {
        report.push(
            "",
            "log",
            rule::LOG,
            format!("log ends at {expected}, schema at {}", c.schema.version),
        );
    }
}

pub(crate) fn check_url(s: &str) -> Result<(), String> {
    match url::Url::parse(s) {
        Ok(u) if matches!(u.scheme(), "http" | "https" | "ftp" | "mailto") => Ok(()),
        Ok(u) => Err(format!("unsupported URL scheme {:?}", u.scheme())),
        Err(e) => Err(format!("malformed URL {s:?}: {e}")),
    }
}

fn check_document(c: &Collection, doc: &Document, report: &mut ValidationReport) {
    if let Err(e) = check_document_id(&doc.id) {
        report.push(&doc.id, "/", rule::DOCUMENT_ID, e);
    }
    if !doc.root.type_path.is_root() || !matches!(doc.root.payload, Payload::Children(_)) {
        report.push(
            &doc.id,
            "/",
            rule::ROOT,
            "document root must be a composite at /".into(),
        );
        return;
    }
    check_children(c, doc, &doc.root, Some(&c.schema.root), report);
}

/// `ty` is `None` when the parent itself is unknown; children are then only
/// reported as unknown paths.
fn check_children(
    c: &Collection,
    doc: &Document,
    parent: &ElementInstance,
    ty: Option<&ElementType>,
    report: &mut ValidationReport,
) {
    let mut counts: BTreeMap<&ElementPath, usize> = BTreeMap::new();
    for child in parent.children() {
        let path = &child.type_path;
        if path.parent().as_ref() != Some(&parent.type_path) {
            report.push(
                &doc.id,
                path,
                rule::PATH_MISMATCH,
                format!("instance nested under {}", parent.type_path),
            );
        }
        let child_ty = ty.and_then(|t| path.name().and_then(|n| t.child(n)));
        let child_ty = child_ty.filter(|_| c.schema.get(path).is_some());
        match child_ty {
            None => {
                report.push(&doc.id, path, rule::UNKNOWN_PATH, "not in schema".into());
            }
            Some(t) => {
                *counts.entry(path).or_default() += 1;
                check_payload(c, doc, child, t, report);
            }
        }
        if let Payload::Children(_) = child.payload {
            check_children(c, doc, child, child_ty, report);
        }
    }
    if let Some(t) = ty {
        for (path, n) in counts {
            if let Some(ct) = path.name().and_then(|name| t.child(name)) {
                if !ct.multiplicity.admits(n) {
                    report.push(
                        &doc.id,
                        path,
                        rule::MULTIPLICITY,
                        format!("{n} siblings but multiplicity is {}", ct.multiplicity),
                    );
                }
            }
        }
    }
}

fn check_payload(
    c: &Collection,
    doc: &Document,
    inst: &ElementInstance,
    ty: &ElementType,
    report: &mut ValidationReport,
) {
    let path = &inst.type_path;
    if inst.payload.kind() != ty.kind {
        report.push(
            &doc.id,
            path,
            rule::KIND_MISMATCH,
            format!("{} payload for {} type", inst.payload.kind(), ty.kind),
        );
        return;
    }
    match &inst.payload {
        Payload::Resource(id) => {
            if !c.resources.contains_key(id) {
                report.push(
                    &doc.id,
                    path,
                    rule::DANGLING_RESOURCE,
                    format!("resource {id} missing"),
                );
            }
        }
        Payload::Link(target) => match target.kind {
            LinkKind::InternalDocument => {
                if !c.documents.contains_key(&target.value) {
                    report.push(
                        &doc.id,
                        path,
                        rule::DANGLING_LINK,
                        format!("document {} missing", target.value),
                    );
                }
            }
            LinkKind::InternalAnnotation => {
                if !c.annotations.contains_key(&target.value) {
                    report.push(
                        &doc.id,
                        path,
                        rule::DANGLING_LINK,
                        format!("annotation {} missing", target.value),
                    );
                }
            }
            LinkKind::ExternalUrl => {
                if let Err(e) = check_url(&target.value) {
                    report.push(&doc.id, path, rule::BAD_URL, e);
                }
            }
        },
        Payload::Quiz(q) => {
            if let Err(e) = q.check() {
                report.push(&doc.id, path, rule::MCQ, e);
            }
        }
        Payload::Text(_) | Payload::Children(_) => {}
    }
}
