//! Schema curation algebra: rename, remove, merge, move and group element
//! types, with every document rewritten to stay conformant.

mod apply;
mod dsl;
mod script;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ElementPath;

pub use apply::apply_op;
pub(crate) use apply::normalize_order;
pub use dsl::{parse_script, print_op, print_script, ParseError};
pub use script::{apply_script, CurationScript, OpReport, ScriptError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum CurationOp {
    Rename {
        path: ElementPath,
        new_name: String,
    },
    Remove {
        path: ElementPath,
    },
    Merge {
        source: ElementPath,
        target: ElementPath,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_name: Option<String>,
    },
    Move {
        path: ElementPath,
        new_parent: ElementPath,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    Group {
        paths: Vec<ElementPath>,
        new_name: String,
    },
}

impl CurationOp {
    pub fn verb(&self) -> &'static str {
        match self {
            CurationOp::Rename { .. } => "rename",
            CurationOp::Remove { .. } => "remove",
            CurationOp::Merge { .. } => "merge",
            CurationOp::Move { .. } => "move",
            CurationOp::Group { .. } => "group",
        }
    }
}

impl std::fmt::Display for CurationOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_op(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpError {
    #[error("unknown element path {0}")]
    UnknownPath(ElementPath),
    #[error("the schema root cannot be an operand here")]
    RootOperand,
    #[error("invalid name {name:?}: {reason}")]
    InvalidName { name: String, reason: &'static str },
    #[error("{parent} already has a child named {name:?}")]
    NameCollision { parent: ElementPath, name: String },
    #[error("cannot merge {source_path} ({source_kind}) into {target} ({target_kind})")]
    KindMismatch {
        source_path: ElementPath,
        source_kind: crate::model::ElementKind,
        target: ElementPath,
        target_kind: crate::model::ElementKind,
    },
    #[error("{path} cannot be moved into itself or its descendant {new_parent}")]
    Cycle {
        path: ElementPath,
        new_parent: ElementPath,
    },
    #[error("document {document}: {parent} has {count} candidate parent instances")]
    AmbiguousReattachment {
        document: String,
        parent: ElementPath,
        count: usize,
    },
    #[error("{0} would be left without children")]
    EmptyComposite(ElementPath),
    #[error("{0} is not a composite type")]
    NotComposite(ElementPath),
    #[error("invalid operands: {0}")]
    InvalidOperands(String),
}

impl OpError {
    /// Stable rule identifier, used in API error payloads.
    pub fn rule(&self) -> &'static str {
        match self {
            OpError::UnknownPath(_) => "unknown-path",
            OpError::RootOperand => "root-operand",
            OpError::InvalidName { .. } => "invalid-name",
            OpError::NameCollision { .. } => "name-collision",
            OpError::KindMismatch { .. } => "kind-mismatch",
            OpError::Cycle { .. } => "cycle",
            OpError::AmbiguousReattachment { .. } => "ambiguous-reattachment",
            OpError::EmptyComposite(_) => "empty-composite",
            OpError::NotComposite(_) => "not-composite",
            OpError::InvalidOperands(_) => "invalid-operands",
        }
    }

    pub fn path(&self) -> Option<&ElementPath> {
        match self {
            OpError::UnknownPath(p)
            | OpError::EmptyComposite(p)
            | OpError::NotComposite(p) => Some(p),
            OpError::NameCollision { parent, .. } => Some(parent),
            OpError::KindMismatch { source_path, .. } => Some(source_path),
            OpError::Cycle { path, .. } => Some(path),
            OpError::AmbiguousReattachment { parent, .. } => Some(parent),
            _ => None,
        }
    }
}
