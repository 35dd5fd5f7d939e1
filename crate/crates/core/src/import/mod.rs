//! Plugin-based importation: sources produce raw record trees, the engine
//! infers a schema over them and turns them into documents.

mod files;
mod infer;
mod json;
mod medpix;
mod package;
mod source;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_document_id, content_id, to_canonical, validate_collection, BlobStore, Document,
    ElementKind, ElementPath, LinkTarget, Mcq, Resource, ResourceId, ValidationReport,
};
use crate::store::Bundle;

pub use files::FilesPlugin;
pub use infer::{infer_schema, merge_schemas, records_to_documents};
pub use medpix::{MedpixCursor, MedpixPlugin};
pub use package::PackagePlugin;
pub use table::TablePlugin;

/// A value in a raw record tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawValue {
    Text(String),
    Record(Vec<RawField>),
    /// Repeated occurrences of the enclosing field name.
    List(Vec<RawValue>),
    Resource(ResourceId),
    Link(LinkTarget),
    Quiz(Mcq),
}

impl RawValue {
    pub fn kind(&self) -> Option<ElementKind> {
        Some(match self {
            RawValue::Text(_) => ElementKind::Atomic,
            RawValue::Record(_) => ElementKind::Composite,
            RawValue::Resource(_) => ElementKind::ResourceRef,
            RawValue::Link(_) => ElementKind::Link,
            RawValue::Quiz(_) => ElementKind::Quiz,
            RawValue::List(_) => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawField {
    pub name: String,
    pub value: RawValue,
}

impl RawField {
    pub fn new(name: impl Into<String>, value: RawValue) -> Self {
        RawField {
            name: name.into(),
            value,
        }
    }

    pub fn text(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(name, RawValue::Text(text.into()))
    }
}

/// One source record, the plugin-to-engine intermediate form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    /// Stable identifier in the source; empty when the source has none.
    pub source_id: String,
    /// Where the record came from (URL, file path, row number).
    pub locator: String,
    /// Supporting records (topics behind a case) are counted separately.
    #[serde(default)]
    pub auxiliary: bool,
    pub tree: Vec<RawField>,
}

impl RawRecord {
    pub fn new(source_id: impl Into<String>, locator: impl Into<String>, tree: Vec<RawField>) -> Self {
        RawRecord {
            source_id: source_id.into(),
            locator: locator.into(),
            auxiliary: false,
            tree,
        }
    }

    /// The document id: the source id if it has one, else a content hash.
    pub fn document_id(&self) -> String {
        if self.source_id.is_empty() {
            let bytes = to_canonical(&self.tree).expect("raw trees always encode");
            format!("doc-{}", content_id(&bytes))
        } else {
            self.source_id.clone()
        }
    }
}

/// Plugin parameters: a string map plus resume state from an earlier run.
#[derive(Debug, Clone, Default)]
pub struct ImportParams {
    pub values: BTreeMap<String, String>,
    pub cursor: Option<serde_json::Value>,
}

impl ImportParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, ImportError> {
        self.get(key)
            .ok_or_else(|| ImportError::Param(format!("missing parameter {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ImportError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ImportError::Param(format!("parameter {key:?}: bad value {v:?}"))),
        }
    }
}

/// Everything a plugin fetched.
#[derive(Debug, Clone, Default)]
pub struct Fetched {
    pub records: Vec<RawRecord>,
    pub resources: BTreeMap<ResourceId, Resource>,
    pub blobs: BlobStore,
    pub skipped: usize,
    pub messages: Vec<String>,
    /// Set when the source failed part-way; the records are a usable prefix.
    pub interrupted: Option<String>,
    /// Resume state to persist when interrupted.
    pub cursor: Option<serde_json::Value>,
}

impl Fetched {
    pub fn add_resource(&mut self, resource: Resource, bytes: Option<Vec<u8>>) -> ResourceId {
        let id = resource.id.clone();
        if let Some(b) = bytes {
            self.blobs.insert(b);
        }
        self.resources.entry(id.clone()).or_insert(resource);
        id
    }

    pub fn skip(&mut self, message: impl Into<String>) {
        self.skipped += 1;
        self.messages.push(message.into());
    }
}

pub trait ImportPlugin: Send + Sync {
    fn name(&self) -> &'static str;
    fn fetch(&self, params: &ImportParams) -> Result<Fetched, ImportError>;
}

/// Looks up a built-in plugin by name.
pub fn plugin(name: &str) -> Option<Box<dyn ImportPlugin>> {
    Some(match name {
        "medpix" => Box::new(MedpixPlugin),
        "files" => Box::new(FilesPlugin),
        "table" => Box::new(TablePlugin),
        "package" => Box::new(PackagePlugin),
        _ => return None,
    })
}

pub const PLUGINS: &[&str] = &["medpix", "files", "table", "package"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub plugin: String,
    /// Primary documents added.
    pub documents: usize,
    /// Supporting documents added (e.g. topics linked from cases).
    pub auxiliary_documents: usize,
    /// Resources new to the collection.
    pub resources: usize,
    pub skipped: usize,
    pub errors: usize,
    pub messages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interrupted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor: Option<serde_json::Value>,
}

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("unknown plugin {0:?} (available: medpix, files, table, package)")]
    UnknownPlugin(String),
    #[error("{0}")]
    Param(String),
    #[error("source unreachable: {0}")]
    Unreachable(String),
    #[error("conflicting kinds at {path}: {first} and {second}")]
    KindConflict {
        path: ElementPath,
        first: ElementKind,
        second: ElementKind,
    },
    #[error("malformed source: {0}")]
    Malformed(String),
    #[error("import produced an invalid collection ({} violations)", .0.len())]
    Invalid(ValidationReport),
}

impl ImportError {
    pub fn rule(&self) -> &'static str {
        match self {
            ImportError::UnknownPlugin(_) | ImportError::Param(_) => "bad-parameter",
            ImportError::Unreachable(_) => "unreachable",
            ImportError::KindConflict { .. } => "kind-conflict",
            ImportError::Malformed(_) => "malformed",
            ImportError::Invalid(_) => "invalid-collection",
        }
    }
}

/// Runs a plugin and adds its output to `sink`.
pub fn import(
    plugin_name: &str,
    params: &ImportParams,
    sink: &Bundle,
) -> Result<(Bundle, ImportReport), ImportError> {
    let p = plugin(plugin_name).ok_or_else(|| ImportError::UnknownPlugin(plugin_name.into()))?;
    let fetched = p.fetch(params)?;
    import_fetched(p.name(), fetched, sink)
}

/// Adds already-fetched records to `sink`. Malformed and duplicate records
/// are skipped and counted; a kind conflict aborts the whole import.
pub fn import_fetched(
    plugin_name: &str,
    fetched: Fetched,
    sink: &Bundle,
) -> Result<(Bundle, ImportReport), ImportError> {
    let mut report = ImportReport {
        plugin: plugin_name.into(),
        skipped: fetched.skipped,
        errors: fetched.skipped,
        messages: fetched.messages,
        interrupted: fetched.interrupted,
        cursor: fetched.cursor,
        ..ImportReport::default()
    };
    let mut seen: BTreeSet<String> = sink.collection.documents.keys().cloned().collect();
    let mut accepted = Vec::new();
    for r in fetched.records {
        let id = r.document_id();
        if let Err(msg) = check_document_id(&id).and_then(|_| infer::check_record(&r)) {
            report.skipped += 1;
            report.errors += 1;
            report.messages.push(format!("skipped {id} ({}): {msg}", r.locator));
        } else if !seen.insert(id.clone()) {
            report.skipped += 1;
            report.messages.push(format!("skipped {id} ({}): duplicate document id", r.locator));
        } else {
            accepted.push(r);
        }
    }

    let inferred = infer_schema(&accepted)?;
    let mut c = sink.collection.clone();
    c.schema = merge_schemas(&c.schema, &inferred)?;
    for doc in records_to_documents(&accepted, &c.schema, plugin_name) {
        c.insert_document(doc);
    }
    for r in &accepted {
        if r.auxiliary {
            report.auxiliary_documents += 1;
        } else {
            report.documents += 1;
        }
    }

    // keep only resources some document actually references
    let referenced = referenced_resources(c.documents.values());
    let mut blobs = sink.blobs.clone();
    for (id, r) in fetched.resources {
        if !referenced.contains(&id) || c.resources.contains_key(&id) {
            continue;
        }
        if let Some(bytes) = fetched.blobs.get(&id) {
            blobs.insert(bytes.to_vec());
        }
        c.resources.insert(id, r);
        report.resources += 1;
    }

    let violations = validate_collection(&c);
    if !violations.is_empty() {
        return Err(ImportError::Invalid(violations));
    }
    Ok((Bundle::new(c, blobs), report))
}

fn referenced_resources<'a>(docs: impl Iterator<Item = &'a Document>) -> BTreeSet<ResourceId> {
    let mut out = BTreeSet::new();
    for d in docs {
        for i in d.instances() {
            if let crate::model::Payload::Resource(id) = &i.payload {
                out.insert(id.clone());
            }
        }
    }
    out
}
