//! Document-level editing: value edits, element insertion, image
//! annotations and links. Every function returns a new collection and
//! rejects any edit that would leave the collection invalid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::validate::check_url;
use crate::model::{
    validate_collection, Annotation, Collection, ElementInstance, ElementKind, ElementPath,
    ImageSize, InstancePath, LinkKind, LinkTarget, Multiplicity, Payload, Region, ResourceId,
    ValidationReport,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurationError {
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("document {document}: no instance at {path}")]
    UnknownInstance { document: String, path: InstancePath },
    #[error("{path} is {kind}, not atomic")]
    NonAtomic { path: InstancePath, kind: ElementKind },
    #[error("{type_path} is not a child type of {parent}")]
    NotChildType { parent: ElementPath, type_path: ElementPath },
    #[error("{type_path} allows no further instance under {parent}")]
    Multiplicity { parent: InstancePath, type_path: ElementPath },
    #[error("{type_path} is {expected}, payload is {got}")]
    KindMismatch {
        type_path: ElementPath,
        expected: ElementKind,
        got: ElementKind,
    },
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error("resource {0} is not an image")]
    NotImage(ResourceId),
    #[error("annotation comment is empty")]
    EmptyComment,
    #[error("annotation region {0} has zero area")]
    EmptyRegion(Region),
    #[error("region {region} exceeds the {}x{} image", size.width, size.height)]
    OutOfBounds { region: Region, size: ImageSize },
    #[error("{0} has no link element with room for another link")]
    NoLinkSlot(InstancePath),
    #[error("link target {kind:?} {value:?} does not exist", kind = .0.kind, value = .0.value)]
    DanglingTarget(LinkTarget),
    #[error("{0}")]
    BadUrl(String),
    #[error("edit would leave the collection invalid ({} violations)", .0.len())]
    Invalid(ValidationReport),
}

impl CurationError {
    pub fn rule(&self) -> &'static str {
        match self {
            CurationError::UnknownDocument(_) => "unknown-document",
            CurationError::UnknownInstance { .. } => "unknown-path",
            CurationError::NonAtomic { .. } => "non-atomic",
            CurationError::NotChildType { .. } => "not-child-type",
            CurationError::Multiplicity { .. } => "multiplicity",
            CurationError::KindMismatch { .. } => "kind-mismatch",
            CurationError::UnknownResource(_) => "unknown-resource",
            CurationError::NotImage(_) => "not-image",
            CurationError::EmptyComment => "empty-comment",
            CurationError::EmptyRegion(_) => "empty-region",
            CurationError::OutOfBounds { .. } => "out-of-bounds",
            CurationError::NoLinkSlot(_) => "no-link-slot",
            CurationError::DanglingTarget(_) => "dangling-link",
            CurationError::BadUrl(_) => "bad-url",
            CurationError::Invalid(_) => "invalid-collection",
        }
    }

    pub fn path(&self) -> Option<String> {
        match self {
            CurationError::UnknownInstance { path, .. }
            | CurationError::NonAtomic { path, .. }
            | CurationError::NoLinkSlot(path) => Some(path.to_string()),
            CurationError::NotChildType { type_path, .. }
            | CurationError::KindMismatch { type_path, .. } => Some(type_path.to_string()),
            CurationError::Multiplicity { parent, type_path } => {
                Some(format!("{parent} {type_path}"))
            }
            _ => None,
        }
    }
}

/// A document edit, as sent by the service and the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum DocCommand {
    Set {
        path: InstancePath,
        text: String,
    },
    Insert {
        parent: InstancePath,
        type_path: ElementPath,
        #[serde(flatten)]
        payload: Payload,
    },
    Link {
        parent: InstancePath,
        target: LinkTarget,
    },
}

pub fn apply_command(c: &Collection, doc_id: &str, cmd: &DocCommand) -> Result<Collection, CurationError> {
    match cmd {
        DocCommand::Set { path, text } => set_value(c, doc_id, path, text),
        DocCommand::Insert {
            parent,
            type_path,
            payload,
        } => insert_element(c, doc_id, parent, type_path, payload.clone()),
        DocCommand::Link { parent, target } => add_link(c, doc_id, parent, target.clone()),
    }
}

/// Walks an instance path; each step picks the n-th same-named child.
fn resolve<'a>(root: &'a mut ElementInstance, path: &InstancePath) -> Option<&'a mut ElementInstance> {
    let mut node = root;
    for step in path.steps() {
        node = node
            .children_mut()?
            .iter_mut()
            .filter(|k| k.name() == Some(step.name.as_str()))
            .nth(step.ordinal)?;
    }
    Some(node)
}

/// Runs `edit` against a copy of document `doc_id` and checks the result.
fn edit_document(
    c: &Collection,
    doc_id: &str,
    edit: impl FnOnce(&mut ElementInstance) -> Result<(), CurationError>,
) -> Result<Collection, CurationError> {
    let mut out = c.clone();
    let doc = out
        .documents
        .get_mut(doc_id)
        .ok_or_else(|| CurationError::UnknownDocument(doc_id.to_string()))?;
    edit(&mut doc.root)?;
    checked(out)
}

fn checked(c: Collection) -> Result<Collection, CurationError> {
    let report = validate_collection(&c);
    if report.is_empty() {
        Ok(c)
    } else {
        Err(CurationError::Invalid(report))
    }
}

/// Replaces the text of an atomic instance. Empty text is a value.
pub fn set_value(
    c: &Collection,
    doc_id: &str,
    path: &InstancePath,
    text: &str,
) -> Result<Collection, CurationError> {
    edit_document(c, doc_id, |root| {
        let node = resolve(root, path).ok_or_else(|| CurationError::UnknownInstance {
            document: doc_id.to_string(),
            path: path.clone(),
        })?;
        match &mut node.payload {
            Payload::Text(t) => {
                *t = text.to_string();
                Ok(())
            }
            other => Err(CurationError::NonAtomic {
                path: path.clone(),
                kind: other.kind(),
            }),
        }
    })
}

/// Appends a new instance after the existing same-typed siblings under
/// `parent`. Composite payloads must already carry their own children.
pub fn insert_element(
    c: &Collection,
    doc_id: &str,
    parent: &InstancePath,
    type_path: &ElementPath,
    payload: Payload,
) -> Result<Collection, CurationError> {
    let parent_type = parent.element_path();
    let ty = c
        .schema
        .get(type_path)
        .filter(|_| type_path.parent().as_ref() == Some(&parent_type))
        .ok_or_else(|| CurationError::NotChildType {
            parent: parent_type.clone(),
            type_path: type_path.clone(),
        })?;
    if ty.kind != payload.kind() {
        return Err(CurationError::KindMismatch {
            type_path: type_path.clone(),
            expected: ty.kind,
            got: payload.kind(),
        });
    }
    let multiplicity = ty.multiplicity;
    let rank = |c: &Collection, name: Option<&str>| {
        name.map_or(usize::MAX, |n| c.schema.child_rank(&parent_type, n))
    };
    let my_rank = rank(c, type_path.name());
    edit_document(c, doc_id, |root| {
        let node = resolve(root, parent).ok_or_else(|| CurationError::UnknownInstance {
            document: doc_id.to_string(),
            path: parent.clone(),
        })?;
        let kids = node.children_mut().ok_or_else(|| CurationError::NonAtomic {
            path: parent.clone(),
            kind: node_kind(c, &parent_type),
        })?;
        let existing = kids.iter().filter(|k| &k.type_path == type_path).count();
        if multiplicity != Multiplicity::Many && existing >= 1 {
            return Err(CurationError::Multiplicity {
                parent: parent.clone(),
                type_path: type_path.clone(),
            });
        }
        // after the last sibling whose type is declared no later than ours
        let at = kids
            .iter()
            .rposition(|k| rank(c, k.name()) <= my_rank)
            .map_or(0, |i| i + 1);
        kids.insert(at, ElementInstance::new(type_path.clone(), payload));
        Ok(())
    })
}

fn node_kind(c: &Collection, p: &ElementPath) -> ElementKind {
    c.schema.get(p).map_or(ElementKind::Composite, |t| t.kind)
}

/// Stores a rectangle comment over an image. Ids derive from the resource,
/// region and comment, so adding the same annotation twice is a no-op.
pub fn add_annotation(
    c: &Collection,
    resource_id: &ResourceId,
    region: Region,
    comment: &str,
    author: &str,
) -> Result<(Collection, String), CurationError> {
    let r = c
        .resources
        .get(resource_id)
        .ok_or_else(|| CurationError::UnknownResource(resource_id.clone()))?;
    if !r.is_image() {
        return Err(CurationError::NotImage(resource_id.clone()));
    }
    if comment.trim().is_empty() {
        return Err(CurationError::EmptyComment);
    }
    if region.w == 0 || region.h == 0 {
        return Err(CurationError::EmptyRegion(region));
    }
    if let Some(size) = r.image {
        if !region.fits(size) {
            return Err(CurationError::OutOfBounds { region, size });
        }
    }
    let id = Annotation::derive_id(resource_id, region, comment);
    if c.annotations.contains_key(&id) {
        return Ok((c.clone(), id));
    }
    let mut out = c.clone();
    out.annotations.insert(
        id.clone(),
        Annotation {
            id: id.clone(),
            resource_id: resource_id.clone(),
            region,
            comment: comment.to_string(),
            author: author.to_string(),
        },
    );
    Ok((checked(out)?, id))
}

/// Appends a link under `parent`, into the first link-kind child type that
/// still has room. Internal targets must exist; URLs are checked
/// syntactically only.
pub fn add_link(
    c: &Collection,
    doc_id: &str,
    parent: &InstancePath,
    target: LinkTarget,
) -> Result<Collection, CurationError> {
    match target.kind {
        LinkKind::InternalDocument if !c.documents.contains_key(&target.value) => {
            return Err(CurationError::DanglingTarget(target))
        }
        LinkKind::InternalAnnotation if !c.annotations.contains_key(&target.value) => {
            return Err(CurationError::DanglingTarget(target))
        }
        LinkKind::ExternalUrl => check_url(&target.value).map_err(CurationError::BadUrl)?,
        _ => {}
    }
    let doc = c
        .documents
        .get(doc_id)
        .ok_or_else(|| CurationError::UnknownDocument(doc_id.to_string()))?;
    let parent_type = parent.element_path();
    let link_types: Vec<(ElementPath, Multiplicity)> = c
        .schema
        .get(&parent_type)
        .map(|t| {
            t.children
                .iter()
                .filter(|k| k.kind == ElementKind::Link)
                .map(|k| (parent_type.child(k.name.as_str()), k.multiplicity))
                .collect()
        })
        .unwrap_or_default();
    let mut root = doc.root.clone();
    let node = resolve(&mut root, parent).ok_or_else(|| CurationError::UnknownInstance {
        document: doc_id.to_string(),
        path: parent.clone(),
    })?;
    let slot = link_types.into_iter().find(|(p, m)| {
        *m == Multiplicity::Many || !node.children().iter().any(|k| &k.type_path == p)
    });
    let (type_path, _) = slot.ok_or_else(|| CurationError::NoLinkSlot(parent.clone()))?;
    insert_element(c, doc_id, parent, &type_path, Payload::Link(target))
}
