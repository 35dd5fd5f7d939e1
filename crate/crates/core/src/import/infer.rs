//! Schema inference over raw records and record-to-document conversion.

use std::collections::BTreeMap;

use super::{ImportError, RawField, RawRecord, RawValue};
use crate::model::{
    check_name, Document, ElementInstance, ElementKind, ElementPath, ElementType, Multiplicity,
    Origin, Payload, Schema,
};
use crate::ops::normalize_order;

/// Empty records and lists carry no data and count as absent.
fn present(v: &RawValue) -> bool {
    match v {
        RawValue::Record(fields) => fields.iter().any(|f| present(&f.value)),
        RawValue::List(items) => items.iter().any(present),
        _ => true,
    }
}

/// Fields with lists expanded into repeated occurrences, absent values dropped.
fn expand(fields: &[RawField]) -> Vec<(&str, &RawValue)> {
    let mut out = Vec::new();
    for f in fields {
        match &f.value {
            RawValue::List(items) => {
                out.extend(items.iter().filter(|v| present(v)).map(|v| (f.name.as_str(), v)))
            }
            v if present(v) => out.push((f.name.as_str(), v)),
            _ => {}
        }
    }
    out
}

/// Structural checks a record must pass before it can become a document.
pub(crate) fn check_record(r: &RawRecord) -> Result<(), String> {
    fn walk(path: &ElementPath, fields: &[RawField]) -> Result<(), String> {
        for f in fields {
            check_name(&f.name).map_err(|e| format!("{path}: field {:?}: {e}", f.name))?;
            let here = path.child(f.name.as_str());
            let items: Vec<&RawValue> = match &f.value {
                RawValue::List(items) => items.iter().collect(),
                v => vec![v],
            };
            for v in items {
                match v {
                    RawValue::List(_) => return Err(format!("{here}: nested list")),
                    RawValue::Record(inner) => walk(&here, inner)?,
                    RawValue::Quiz(q) => q.check().map_err(|e| format!("{here}: {e}"))?,
                    RawValue::Link(t) if t.kind == crate::model::LinkKind::ExternalUrl => {
                        crate::model::validate::check_url(&t.value)
                            .map_err(|e| format!("{here}: {e}"))?
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
    if expand(&r.tree).is_empty() {
        return Err("record has no values".into());
    }
    walk(&ElementPath::root(), &r.tree)
}

struct Node {
    kind: ElementKind,
    instances: usize,
    kids: Vec<(String, Stat)>,
}

struct Stat {
    node: Node,
    present_in: usize,
    max_repeat: usize,
}

impl Node {
    fn new(kind: ElementKind) -> Self {
        Node {
            kind,
            instances: 0,
            kids: Vec::new(),
        }
    }

    fn observe(&mut self, path: &ElementPath, fields: &[RawField]) -> Result<(), ImportError> {
        self.instances += 1;
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for (name, value) in expand(fields) {
            let kind = value.kind().expect("lists are expanded");
            let idx = match self.kids.iter().position(|(n, _)| n == name) {
                Some(i) => i,
                None => {
                    self.kids.push((
                        name.to_string(),
                        Stat {
                            node: Node::new(kind),
                            present_in: 0,
                            max_repeat: 0,
                        },
                    ));
                    self.kids.len() - 1
                }
            };
            let stat = &mut self.kids[idx].1;
            let here = path.child(name);
            if stat.node.kind != kind {
                return Err(ImportError::KindConflict {
                    path: here,
                    first: stat.node.kind,
                    second: kind,
                });
            }
            match value {
                RawValue::Record(inner) => stat.node.observe(&here, inner)?,
                _ => stat.node.instances += 1,
            }
            *counts.entry(idx).or_default() += 1;
        }
        for (idx, n) in counts {
            let stat = &mut self.kids[idx].1;
            stat.present_in += 1;
            stat.max_repeat = stat.max_repeat.max(n);
        }
        Ok(())
    }

    fn children(&self) -> Vec<ElementType> {
        self.kids
            .iter()
            .map(|(name, s)| {
                let multiplicity = if s.max_repeat > 1 {
                    Multiplicity::Many
                } else if s.present_in < self.instances {
                    Multiplicity::Optional
                } else {
                    Multiplicity::One
                };
                ElementType {
                    name: name.clone(),
                    kind: s.node.kind,
                    multiplicity,
                    children: s.node.children(),
                }
            })
            .collect()
    }
}

/// Path union of all record trees. A type is `many` if some parent instance
/// repeats it, `optional` if some parent instance lacks it, else `one`.
/// Children are ordered by first appearance.
pub fn infer_schema(records: &[RawRecord]) -> Result<Schema, ImportError> {
    let mut root = Node::new(ElementKind::Composite);
    for r in records {
        root.observe(&ElementPath::root(), &r.tree)?;
    }
    Ok(Schema::with_children(root.children()))
}

/// Union of two schemas by path, keeping `base`'s order and version. Types
/// present on one side only become at least optional; multiplicities widen
/// to the looser side.
pub fn merge_schemas(base: &Schema, new: &Schema) -> Result<Schema, ImportError> {
    if base.root.children.is_empty() {
        return Ok(Schema {
            root: new.root.clone(),
            version: base.version,
        });
    }
    let children = union(
        &ElementPath::root(),
        &base.root.children,
        &new.root.children,
    )?;
    let mut out = base.clone();
    out.root.children = children;
    Ok(out)
}

fn union(
    path: &ElementPath,
    a: &[ElementType],
    b: &[ElementType],
) -> Result<Vec<ElementType>, ImportError> {
    let loosen = |t: &ElementType| {
        let mut t = t.clone();
        t.multiplicity = t.multiplicity.max(Multiplicity::Optional);
        t
    };
    let mut out = Vec::with_capacity(a.len());
    for ta in a {
        let here = path.child(ta.name.as_str());
        match b.iter().find(|tb| tb.name == ta.name) {
            Some(tb) if tb.kind != ta.kind => {
                return Err(ImportError::KindConflict {
                    path: here,
                    first: ta.kind,
                    second: tb.kind,
                })
            }
            Some(tb) => out.push(ElementType {
                name: ta.name.clone(),
                kind: ta.kind,
                multiplicity: ta.multiplicity.max(tb.multiplicity),
                children: union(&here, &ta.children, &tb.children)?,
            }),
            None => out.push(loosen(ta)),
        }
    }
    for tb in b.iter().filter(|tb| a.iter().all(|ta| ta.name != tb.name)) {
        out.push(loosen(tb));
    }
    Ok(out)
}

/// Converts records into documents whose children follow `schema` order.
pub fn records_to_documents(records: &[RawRecord], schema: &Schema, plugin: &str) -> Vec<Document> {
    records
        .iter()
        .map(|r| {
            let mut doc = Document::new(
                r.document_id(),
                build(&ElementPath::root(), &r.tree),
                Origin {
                    plugin: plugin.to_string(),
                    locator: r.locator.clone(),
                },
            );
            normalize_order(&mut doc.root, schema);
            doc
        })
        .collect()
}

fn build(path: &ElementPath, fields: &[RawField]) -> Vec<ElementInstance> {
    expand(fields)
        .into_iter()
        .map(|(name, v)| {
            let p = path.child(name);
            let payload = match v {
                RawValue::Text(t) => Payload::Text(t.clone()),
                RawValue::Record(inner) => Payload::Children(build(&p, inner)),
                RawValue::Resource(id) => Payload::Resource(id.clone()),
                RawValue::Link(t) => Payload::Link(t.clone()),
                RawValue::Quiz(q) => Payload::Quiz(q.clone()),
                RawValue::List(_) => unreachable!("lists are expanded"),
            };
            ElementInstance::new(p, payload)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, tree: Vec<RawField>) -> RawRecord {
        RawRecord::new(id, "mem", tree)
    }

    fn record(fields: Vec<RawField>) -> RawValue {
        RawValue::Record(fields)
    }

    #[test]
    fn empty_input_gives_bare_root() {
        let s = infer_schema(&[]).unwrap();
        assert_eq!(s, Schema::empty());
    }

    #[test]
    fn single_record_is_mirrored() {
        let r = rec(
            "a",
            vec![RawField::new(
                "Case",
                record(vec![RawField::new(
                    "Patient",
                    record(vec![RawField::text("Age", "54")]),
                )]),
            )],
        );
        let s = infer_schema(&[r]).unwrap();
        let age = s.get(&"/Case/Patient/Age".parse().unwrap()).unwrap();
        assert_eq!(age.kind, ElementKind::Atomic);
        assert_eq!(age.multiplicity, Multiplicity::One);
        assert_eq!(s.get(&"/Case/Patient".parse().unwrap()).unwrap().kind, ElementKind::Composite);
        assert_eq!(s.type_count(), 3);
    }

    #[test]
    fn multiplicity_and_order() {
        let a = rec(
            "a",
            vec![
                RawField::text("B", "1"),
                RawField::new("K", RawValue::List(vec![RawValue::Text("x".into())])),
            ],
        );
        let b = rec(
            "b",
            vec![
                RawField::text("A", "1"),
                RawField::text("B", "2"),
                RawField::new(
                    "K",
                    RawValue::List(vec![RawValue::Text("x".into()), RawValue::Text("y".into())]),
                ),
                RawField::new("E", RawValue::List(vec![])),
            ],
        );
        let s = infer_schema(&[a, b]).unwrap();
        let names: Vec<_> = s.root.children.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["B", "K", "A"]);
        assert_eq!(s.root.children[0].multiplicity, Multiplicity::One);
        assert_eq!(s.root.children[1].multiplicity, Multiplicity::Many);
        assert_eq!(s.root.children[2].multiplicity, Multiplicity::Optional);
    }

    #[test]
    fn kind_conflict_names_the_path() {
        let a = rec("a", vec![RawField::new("Case", record(vec![RawField::text("X", "t")]))]);
        let b = rec(
            "b",
            vec![RawField::new(
                "Case",
                record(vec![RawField::new("X", record(vec![RawField::text("Y", "t")]))]),
            )],
        );
        match infer_schema(&[a, b]) {
            Err(ImportError::KindConflict { path, .. }) => assert_eq!(path.to_string(), "/Case/X"),
            other => panic!("expected kind conflict, got {other:?}"),
        }
    }

    #[test]
    fn merge_loosens_one_sided_types() {
        let a = Schema::with_children(vec![ElementType::leaf("A", ElementKind::Atomic, Multiplicity::One)]);
        let b = Schema::with_children(vec![
            ElementType::leaf("A", ElementKind::Atomic, Multiplicity::Many),
            ElementType::leaf("B", ElementKind::Atomic, Multiplicity::One),
        ]);
        let m = merge_schemas(&a, &b).unwrap();
        assert_eq!(m.root.children[0].multiplicity, Multiplicity::Many);
        assert_eq!(m.root.children[1].multiplicity, Multiplicity::Optional);
    }
}
