use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::document::Document;
use super::resource::{Annotation, Resource, ResourceId};
use super::schema::Schema;
use crate::ops::CurationOp;

/// One applied schema operation. Versions are the schema versions before and
/// after the operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub op: CurationOp,
    pub pre_version: u64,
    pub post_version: u64,
}

/// The unit of import, curation and export. Values are snapshots: every
/// mutating operation returns a new collection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub schema: Schema,
    pub documents: BTreeMap<String, Document>,
    pub resources: BTreeMap<ResourceId, Resource>,
    pub annotations: BTreeMap<String, Annotation>,
    pub log: Vec<LogEntry>,
}

impl Collection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.schema.version
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.get(id)
    }

    pub fn insert_document(&mut self, doc: Document) {
        self.documents.insert(doc.id.clone(), doc);
    }

    pub fn annotations_for<'a>(
        &'a self,
        resource: &'a ResourceId,
    ) -> impl Iterator<Item = &'a Annotation> + 'a {
        self.annotations
            .values()
            .filter(move |a| &a.resource_id == resource)
    }

    /// Total number of element instances over all documents.
    pub fn instance_count(&self) -> usize {
        self.documents.values().map(Document::instance_count).sum()
    }
}
