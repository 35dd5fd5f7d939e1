//! Collection data model: schema, documents, resources, annotations.

mod canonical;
mod collection;
mod document;
mod path;
mod resource;
mod schema;
pub mod validate;

pub use canonical::{
    canonical_deserialize, canonical_serialize, from_canonical, to_canonical, CanonicalError,
};
pub use collection::{Collection, LogEntry};
pub use document::{
    check_document_id, Document, ElementInstance, LinkKind, LinkTarget, Mcq, Origin, Payload,
};
pub use path::{check_name, ElementPath, InstancePath, InstanceStep, PathError};
pub use resource::{
    content_id, extension_for, guess_media_type, Annotation, BlobStore, ImageSize, Region,
    Resource, ResourceId, ResourceKind,
};
pub use schema::{ElementKind, ElementType, Multiplicity, Schema};
pub use validate::{validate_collection, ValidationReport, Violation};
