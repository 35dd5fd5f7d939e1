use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{apply_op, print_op, CurationOp, OpError};
use crate::model::{validate_collection, Collection, ValidationReport};

/// An ordered batch of curation ops, usually parsed from a `.cdsl` file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CurationScript {
    pub ops: Vec<CurationOp>,
    pub source: String,
}

impl CurationScript {
    pub fn from_ops(ops: Vec<CurationOp>) -> Self {
        let source = super::print_script(&ops);
        CurationScript { ops, source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpReport {
    pub index: usize,
    pub op: String,
    /// Schema version after the op, or `None` if it failed.
    pub version: Option<u64>,
    pub type_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Error)]
pub enum ScriptError {
    #[error("collection is invalid before curation ({} violations)", .0.len())]
    InvalidInput(ValidationReport),
    #[error("op {index} ({op}) failed: {error}")]
    Op {
        index: usize,
        op: String,
        error: OpError,
        reports: Vec<OpReport>,
    },
}

/// Applies every op in order, all or nothing. On failure the caller keeps
/// its original collection; the error names the failing op index and carries
/// the per-op reports up to and including it.
pub fn apply_script(
    c: &Collection,
    script: &CurationScript,
) -> Result<(Collection, Vec<OpReport>), ScriptError> {
    let report = validate_collection(c);
    if !report.is_empty() {
        return Err(ScriptError::InvalidInput(report));
    }
    let mut current = c.clone();
    let mut reports = Vec::with_capacity(script.ops.len());
    for (index, op) in script.ops.iter().enumerate() {
        match apply_op(&current, op) {
            Ok(next) => {
                reports.push(OpReport {
                    index,
                    op: print_op(op),
                    version: Some(next.version()),
                    type_count: Some(next.schema.type_count()),
                    error: None,
                });
                current = next;
            }
            Err(error) => {
                reports.push(OpReport {
                    index,
                    op: print_op(op),
                    version: None,
                    type_count: None,
                    error: Some(error.to_string()),
                });
                return Err(ScriptError::Op {
                    index,
                    op: print_op(op),
                    error,
                    reports,
                });
            }
        }
    }
    Ok((current, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Document, ElementInstance, ElementKind, ElementType, Multiplicity, Origin, Schema,
    };
    use crate::ops::parse_script;

    fn collection() -> Collection {
        let mut c = Collection::new();
        c.schema = Schema::with_children(vec![ElementType::composite(
            "Case",
            Multiplicity::One,
            vec![
                ElementType::leaf("A", ElementKind::Atomic, Multiplicity::One),
                ElementType::leaf("B", ElementKind::Atomic, Multiplicity::One),
            ],
        )]);
        c.insert_document(Document::new(
            "d",
            vec![ElementInstance::composite(
                "/Case".parse().unwrap(),
                vec![
                    ElementInstance::text("/Case/A".parse().unwrap(), "a"),
                    ElementInstance::text("/Case/B".parse().unwrap(), "b"),
                ],
            )],
            Origin {
                plugin: "t".into(),
                locator: "t".into(),
            },
        ));
        c
    }

    #[test]
    fn second_op_on_removed_path_aborts_atomically() {
        let c = collection();
        let s = parse_script("remove /Case/A\nrename /Case/A as Z\n").unwrap();
        match apply_script(&c, &s) {
            Err(ScriptError::Op { index, reports, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(reports.len(), 2);
                assert!(reports[1].error.is_some());
            }
            other => panic!("expected op failure, got {other:?}"),
        }
        assert_eq!(c, collection());
    }

    #[test]
    fn successful_script_extends_the_log() {
        let c = collection();
        let s = parse_script("rename /Case/A as Alpha\ngroup /Case/Alpha, /Case/B as G\n").unwrap();
        let (out, reports) = apply_script(&c, &s).unwrap();
        assert_eq!(out.log.len(), 2);
        assert_eq!(out.version(), 2);
        assert_eq!(reports[1].type_count, Some(4));
    }
}
