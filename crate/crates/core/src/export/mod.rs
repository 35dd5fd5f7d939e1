//! Packaging of a curated collection as an IMS Content Package or a
//! SCORM 1.2 package, plus a structural validator for such packages.

mod check;
mod html;
mod manifest;
mod quiz;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_collection, ElementKind, ElementPath, Payload, ResourceId, ResourceKind,
    ValidationReport,
};
use crate::store::Bundle;
use crate::zipio;

pub use check::{rule, validate_package};
pub use html::render_document_html;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackageFormat {
    #[default]
    Imscp,
    Scorm12,
}

impl std::str::FromStr for PackageFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "imscp" => Ok(PackageFormat::Imscp),
            "scorm12" => Ok(PackageFormat::Scorm12),
            _ => Err(format!("unknown package format {s:?} (expected imscp or scorm12)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detail {
    #[default]
    Full,
    /// Only `summary_paths` (and what lies below them) are rendered.
    Summary,
}

/// What to export and how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportProfile {
    pub format: PackageFormat,
    /// Element types to render, with everything below them. Empty means all.
    pub selection: Vec<ElementPath>,
    /// Document ids to export. `None` exports every document.
    pub document_filter: Option<Vec<String>>,
    pub detail: Detail,
    pub summary_paths: Vec<ElementPath>,
    pub include_quizzes: bool,
    /// Timestamp for archive entries; `None` uses the current time.
    pub fixed_epoch: Option<i64>,
    pub title: String,
}

impl Default for ExportProfile {
    fn default() -> Self {
        ExportProfile {
            format: PackageFormat::Imscp,
            selection: Vec::new(),
            document_filter: None,
            detail: Detail::Full,
            summary_paths: Vec::new(),
            include_quizzes: false,
            fixed_epoch: None,
            title: "Learning objects".into(),
        }
    }
}

impl ExportProfile {
    pub fn new(format: PackageFormat) -> Self {
        ExportProfile {
            format,
            ..Self::default()
        }
    }

    /// Whether values of type `path` are rendered.
    pub fn renders(&self, path: &ElementPath) -> bool {
        let under = |set: &[ElementPath]| set.iter().any(|s| path.starts_with(s));
        (self.selection.is_empty() || under(&self.selection))
            && (self.detail == Detail::Full || under(&self.summary_paths))
    }

    /// Whether `path` lies above something rendered, so its instances are
    /// walked without being rendered themselves.
    pub fn leads_to_render(&self, path: &ElementPath) -> bool {
        let mut targets: Vec<&ElementPath> = self.selection.iter().collect();
        if self.detail == Detail::Summary {
            targets.extend(&self.summary_paths);
        }
        targets.iter().any(|s| s.starts_with(path) && *s != path)
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("collection is invalid: {0}")]
    Invalid(ValidationReport),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("selected path {0} is not in the schema")]
    UnknownPath(ElementPath),
    #[error("summary detail needs at least one summary path")]
    NoSummaryPaths,
    #[error("nothing to export")]
    Empty,
    #[error("bytes of resource {0} are missing")]
    MissingBlob(ResourceId),
    #[error("cannot write archive: {0}")]
    Zip(#[from] zip::result::ZipError),
}

impl ExportError {
    pub fn rule(&self) -> &'static str {
        match self {
            ExportError::Invalid(_) => "invalid-collection",
            ExportError::UnknownDocument(_) => "unknown-document",
            ExportError::UnknownPath(_) => "unknown-path",
            ExportError::NoSummaryPaths => "no-summary-paths",
            ExportError::Empty => "empty-export",
            ExportError::MissingBlob(_) => "missing-blob",
            ExportError::Zip(_) => "zip",
        }
    }
}

/// One exported document and what its page needs.
pub(crate) struct PageSpec {
    pub id: String,
    pub title: String,
    pub assets: BTreeSet<ResourceId>,
    pub quizzes: usize,
}

/// File layout of a package before it is zipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackageLayout {
    pub manifest: String,
    /// Archive path to bytes, excluding the manifest.
    pub files: BTreeMap<String, Vec<u8>>,
}

impl PackageLayout {
    pub fn to_zip(&self, epoch: Option<i64>) -> Result<Vec<u8>, ExportError> {
        let mut entries = self.files.clone();
        entries.insert("imsmanifest.xml".into(), self.manifest.clone().into_bytes());
        Ok(zipio::write_zip(&entries, epoch)?)
    }
}

pub const STYLE_PATH: &str = "shared/style.css";
pub const SCO_SCRIPT_PATH: &str = "shared/sco.js";

pub fn page_path(doc: &str) -> String {
    format!("pages/{doc}.html")
}

pub fn quiz_page_path(doc: &str) -> String {
    format!("quiz/{doc}.html")
}

pub fn quiz_script_path(doc: &str) -> String {
    format!("quiz/{doc}.js")
}

pub fn asset_path(file_name: &str) -> String {
    format!("assets/{file_name}")
}

fn check_profile(b: &Bundle, profile: &ExportProfile) -> Result<Vec<String>, ExportError> {
    let report = validate_collection(&b.collection);
    if !report.is_empty() {
        return Err(ExportError::Invalid(report));
    }
    let schema = &b.collection.schema;
    for p in profile.selection.iter().chain(&profile.summary_paths) {
        if p.is_root() || !schema.contains(p) {
            return Err(ExportError::UnknownPath(p.clone()));
        }
    }
    if profile.detail == Detail::Summary && profile.summary_paths.is_empty() {
        return Err(ExportError::NoSummaryPaths);
    }
    let ids: Vec<String> = match &profile.document_filter {
        None => b.collection.documents.keys().cloned().collect(),
        Some(ids) => {
            let mut seen = BTreeSet::new();
            for id in ids {
                if !b.collection.documents.contains_key(id) {
                    return Err(ExportError::UnknownDocument(id.clone()));
                }
                seen.insert(id.clone());
            }
            seen.into_iter().collect()
        }
    };
    if ids.is_empty() {
        return Err(ExportError::Empty);
    }
    Ok(ids)
}

/// Lays out every file of the package described by `profile`.
pub fn build_package(b: &Bundle, profile: &ExportProfile) -> Result<PackageLayout, ExportError> {
    let ids = check_profile(b, profile)?;
    let exported: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let c = &b.collection;
    let mut files = BTreeMap::new();
    let mut pages = Vec::new();
    for id in &ids {
        let doc = &c.documents[id];
        let page = html::render_page(c, doc, profile, &exported);
        for rid in &page.assets {
            let res = &c.resources[rid];
            if res.kind != ResourceKind::LocalFile {
                continue;
            }
            let bytes = b.blobs.get(rid).ok_or_else(|| ExportError::MissingBlob(rid.clone()))?;
            files.insert(asset_path(&res.file_name()), bytes.to_vec());
        }
        files.insert(page_path(id), page.html.into_bytes());
        let quizzes: Vec<_> = if profile.include_quizzes {
            doc.instances()
                .into_iter()
                .filter_map(|i| match &i.payload {
                    Payload::Quiz(q) => Some(q),
                    _ => None,
                })
                .collect()
        } else {
            Vec::new()
        };
        if profile.format == PackageFormat::Scorm12 && !quizzes.is_empty() {
            files.insert(
                quiz_page_path(id),
                quiz::quiz_page(id, &page.title, &quizzes).into_bytes(),
            );
            files.insert(quiz_script_path(id), quiz::quiz_script(&quizzes).into_bytes());
        }
        pages.push(PageSpec {
            id: id.clone(),
            title: page.title,
            assets: page
                .assets
                .into_iter()
                .filter(|r| c.resources[r].kind == ResourceKind::LocalFile)
                .collect(),
            quizzes: if profile.format == PackageFormat::Scorm12 {
                quizzes.len()
            } else {
                0
            },
        });
    }
    files.insert(STYLE_PATH.into(), html::STYLE.as_bytes().to_vec());
    if profile.format == PackageFormat::Scorm12 {
        files.insert(SCO_SCRIPT_PATH.into(), quiz::SCO_SCRIPT.as_bytes().to_vec());
    }
    let manifest = manifest::manifest(c, profile, &pages);
    Ok(PackageLayout { manifest, files })
}

/// Exports in the profile's format and returns the zip bytes.
pub fn export_package(b: &Bundle, profile: &ExportProfile) -> Result<Vec<u8>, ExportError> {
    build_package(b, profile)?.to_zip(profile.fixed_epoch)
}

pub fn export_imscp(b: &Bundle, profile: &ExportProfile) -> Result<Vec<u8>, ExportError> {
    let p = ExportProfile {
        format: PackageFormat::Imscp,
        ..profile.clone()
    };
    export_package(b, &p)
}

pub fn export_scorm12(b: &Bundle, profile: &ExportProfile) -> Result<Vec<u8>, ExportError> {
    let p = ExportProfile {
        format: PackageFormat::Scorm12,
        ..profile.clone()
    };
    export_package(b, &p)
}

/// Kind of the type at `path`, if the schema has it.
fn kind_of(c: &crate::model::Collection, path: &ElementPath) -> Option<ElementKind> {
    c.schema.get(path).map(|t| t.kind)
}
