use std::collections::BTreeMap;

use super::{CurationOp, OpError};
use crate::model::{
    check_name, Collection, Document, ElementInstance, ElementKind, ElementPath, ElementType,
    LogEntry, Multiplicity, Payload, Schema,
};

/// Applies one schema operation, rewriting every document so that it still
/// conforms to the new schema.
///
/// The input must validate. On success the result has `version + 1` and the
/// op appended to its log; on error the input is untouched (it is never
/// mutated in place).
pub fn apply_op(c: &Collection, op: &CurationOp) -> Result<Collection, OpError> {
    let mut next = c.clone();
    match op {
        CurationOp::Rename { path, new_name } => rename(&mut next, path, new_name)?,
        CurationOp::Remove { path } => remove(&mut next, path)?,
        CurationOp::Merge {
            source,
            target,
            new_name,
        } => merge(&mut next, source, target, new_name.as_deref())?,
        CurationOp::Move {
            path,
            new_parent,
            index,
        } => move_type(&mut next, path, new_parent, *index)?,
        CurationOp::Group { paths, new_name } => group(&mut next, paths, new_name)?,
    }
    widen_multiplicities(&mut next);
    for doc in next.documents.values_mut() {
        normalize_order(&mut doc.root, &next.schema);
    }
    let pre = c.schema.version;
    next.schema.version = pre + 1;
    next.log.push(LogEntry {
        op: op.clone(),
        pre_version: pre,
        post_version: pre + 1,
    });
    Ok(next)
}

fn existing<'a>(schema: &'a Schema, path: &ElementPath) -> Result<&'a ElementType, OpError> {
    if path.is_root() {
        return Err(OpError::RootOperand);
    }
    schema
        .get(path)
        .ok_or_else(|| OpError::UnknownPath(path.clone()))
}

fn valid_name(name: &str) -> Result<(), OpError> {
    check_name(name).map_err(|reason| OpError::InvalidName {
        name: name.to_string(),
        reason,
    })
}

fn parent_of(path: &ElementPath) -> ElementPath {
    path.parent().unwrap_or_default()
}

/// Fails when removing one child would leave a non-root composite empty.
fn ensure_not_emptied(schema: &Schema, parent: &ElementPath) -> Result<(), OpError> {
    let p = schema.get(parent).expect("parent of an existing path");
    if !parent.is_root() && p.children.len() == 1 {
        return Err(OpError::EmptyComposite(parent.clone()));
    }
    Ok(())
}

fn rename(c: &mut Collection, path: &ElementPath, new_name: &str) -> Result<(), OpError> {
    existing(&c.schema, path)?;
    valid_name(new_name)?;
    if path.name() == Some(new_name) {
        return Ok(());
    }
    let parent = parent_of(path);
    if c.schema.get(&parent).and_then(|p| p.child(new_name)).is_some() {
        return Err(OpError::NameCollision {
            parent,
            name: new_name.to_string(),
        });
    }
    let dest = parent.child(new_name);
    c.schema.get_mut(path).expect("checked").name = new_name.to_string();
    for doc in c.documents.values_mut() {
        rebase_instances(&mut doc.root, path, &dest);
    }
    Ok(())
}

fn remove(c: &mut Collection, path: &ElementPath) -> Result<(), OpError> {
    existing(&c.schema, path)?;
    let parent = parent_of(path);
    ensure_not_emptied(&c.schema, &parent)?;
    let name = path.name().expect("non-root");
    c.schema
        .get_mut(&parent)
        .expect("checked")
        .children
        .retain(|t| t.name != name);
    for doc in c.documents.values_mut() {
        drop_instances(&mut doc.root, path);
    }
    Ok(())
}

fn merge(
    c: &mut Collection,
    source: &ElementPath,
    target: &ElementPath,
    new_name: Option<&str>,
) -> Result<(), OpError> {
    let src_ty = existing(&c.schema, source)?.clone();
    let tgt_ty = existing(&c.schema, target)?;
    if source == target || source.starts_with(target) || target.starts_with(source) {
        return Err(OpError::InvalidOperands(format!(
            "cannot merge {source} with its own ancestor or descendant {target}"
        )));
    }
    if src_ty.kind != tgt_ty.kind {
        return Err(OpError::KindMismatch {
            source_path: source.clone(),
            source_kind: src_ty.kind,
            target: target.clone(),
            target_kind: tgt_ty.kind,
        });
    }
    let src_parent = parent_of(source);
    let tgt_parent = parent_of(target);
    if src_parent != tgt_parent {
        ensure_not_emptied(&c.schema, &src_parent)?;
    }
    let final_name = new_name.unwrap_or_else(|| target.name().expect("non-root"));
    valid_name(final_name)?;
    let collides = c
        .schema
        .get(&tgt_parent)
        .expect("checked")
        .children
        .iter()
        .any(|t| {
            t.name == final_name
                && tgt_parent.child(t.name.clone()) != *target
                && tgt_parent.child(t.name.clone()) != *source
        });
    if collides {
        return Err(OpError::NameCollision {
            parent: tgt_parent,
            name: final_name.to_string(),
        });
    }
    let dest = tgt_parent.child(final_name);

    // schema: fold the source subtree into the target, then drop the source
    {
        let t = c.schema.get_mut(target).expect("checked");
        merge_types(t, &src_ty, target)?;
        t.multiplicity = t.multiplicity.max(src_ty.multiplicity);
    }
    let src_name = source.name().expect("non-root").to_string();
    c.schema
        .get_mut(&src_parent)
        .expect("checked")
        .children
        .retain(|t| t.name != src_name);
    c.schema.get_mut(target).expect("checked").name = final_name.to_string();

    // retype the source onto the old target path first, so that a final
    // name equal to the source name cannot collide halfway
    for doc in c.documents.values_mut() {
        reattach(doc, source, &tgt_parent, target)?;
        rebase_instances(&mut doc.root, target, &dest);
    }
    Ok(())
}

fn merge_types(
    target: &mut ElementType,
    source: &ElementType,
    at: &ElementPath,
) -> Result<(), OpError> {
    for sc in &source.children {
        match target.child_mut(&sc.name) {
            Some(tc) => {
                if tc.kind != sc.kind {
                    return Err(OpError::KindMismatch {
                        source_path: at.child(sc.name.clone()),
                        source_kind: sc.kind,
                        target: at.child(tc.name.clone()),
                        target_kind: tc.kind,
                    });
                }
                tc.multiplicity = tc.multiplicity.max(sc.multiplicity);
                let sub = at.child(sc.name.clone());
                merge_types(tc, sc, &sub)?;
            }
            None => {
                let mut n = sc.clone();
                n.multiplicity = n.multiplicity.max(Multiplicity::Optional);
                target.children.push(n);
            }
        }
    }
    for tc in target.children.iter_mut() {
        if source.child(&tc.name).is_none() {
            tc.multiplicity = tc.multiplicity.max(Multiplicity::Optional);
        }
    }
    Ok(())
}

fn move_type(
    c: &mut Collection,
    path: &ElementPath,
    new_parent: &ElementPath,
    index: Option<usize>,
) -> Result<(), OpError> {
    let ty = existing(&c.schema, path)?.clone();
    let parent_ty = c
        .schema
        .get(new_parent)
        .ok_or_else(|| OpError::UnknownPath(new_parent.clone()))?;
    if parent_ty.kind != ElementKind::Composite {
        return Err(OpError::NotComposite(new_parent.clone()));
    }
    if new_parent.starts_with(path) {
        return Err(OpError::Cycle {
            path: path.clone(),
            new_parent: new_parent.clone(),
        });
    }
    let old_parent = parent_of(path);
    let same_parent = &old_parent == new_parent;
    if !same_parent {
        if parent_ty.child(&ty.name).is_some() {
            return Err(OpError::NameCollision {
                parent: new_parent.clone(),
                name: ty.name.clone(),
            });
        }
        ensure_not_emptied(&c.schema, &old_parent)?;
    }
    let remaining = parent_ty.children.len() - usize::from(same_parent);
    let at = index.unwrap_or(remaining);
    if at > remaining {
        return Err(OpError::InvalidOperands(format!(
            "index {at} out of range 0..={remaining} under {new_parent}"
        )));
    }

    c.schema
        .get_mut(&old_parent)
        .expect("checked")
        .children
        .retain(|t| t.name != ty.name);
    c.schema
        .get_mut(new_parent)
        .expect("checked")
        .children
        .insert(at, ty.clone());

    if !same_parent {
        let dest = new_parent.child(ty.name.clone());
        for doc in c.documents.values_mut() {
            reattach(doc, path, new_parent, &dest)?;
        }
    }
    Ok(())
}

fn group(c: &mut Collection, paths: &[ElementPath], new_name: &str) -> Result<(), OpError> {
    let first = paths
        .first()
        .ok_or_else(|| OpError::InvalidOperands("group needs at least one path".into()))?;
    for p in paths {
        existing(&c.schema, p)?;
    }
    let parent = parent_of(first);
    for (i, p) in paths.iter().enumerate() {
        if parent_of(p) != parent {
            return Err(OpError::InvalidOperands(format!(
                "grouped types must share a parent: {p} is not under {parent}"
            )));
        }
        if paths[..i].contains(p) {
            return Err(OpError::InvalidOperands(format!("{p} listed twice")));
        }
    }
    valid_name(new_name)?;
    let parent_ty = c.schema.get(&parent).expect("checked");
    if parent_ty.child(new_name).is_some() {
        return Err(OpError::NameCollision {
            parent,
            name: new_name.to_string(),
        });
    }
    let members: Vec<String> = paths
        .iter()
        .map(|p| p.name().expect("non-root").to_string())
        .collect();
    let first_index = parent_ty.child_index(&members[0]).expect("checked");
    let insert_at = parent_ty.children[..first_index]
        .iter()
        .filter(|t| !members.contains(&t.name))
        .count();
    let group_children: Vec<ElementType> = members
        .iter()
        .map(|m| parent_ty.child(m).expect("checked").clone())
        .collect();

    let p = c.schema.get_mut(&parent).expect("checked");
    p.children.retain(|t| !members.contains(&t.name));
    p.children.insert(
        insert_at,
        ElementType::composite(new_name, Multiplicity::One, group_children),
    );

    let group_path = parent.child(new_name);
    for doc in c.documents.values_mut() {
        for route in locate(&doc.root, &parent) {
            let host = at_route_mut(&mut doc.root, &route);
            let kids = host.children_mut().expect("composite instance");
            let mut taken: Vec<ElementInstance> = Vec::new();
            let mut kept = Vec::with_capacity(kids.len());
            for k in kids.drain(..) {
                if paths.contains(&k.type_path) {
                    taken.push(k);
                } else {
                    kept.push(k);
                }
            }
            taken.sort_by_key(|k| paths.iter().position(|p| p == &k.type_path));
            for k in taken.iter_mut() {
                let from = k.type_path.clone();
                let dest = group_path.child(from.name().expect("non-root"));
                rebase_instances(k, &from, &dest);
            }
            kept.push(ElementInstance::composite(group_path.clone(), taken));
            *kids = kept;
        }
    }
    Ok(())
}

/// Moves every instance typed `src` into the single `dest_parent` instance
/// found in the same scope, retyping it (and its subtree) to `dest`.
///
/// The scope is the deepest type that is an ancestor of both the old and the
/// new parent; each instance of it is handled on its own. Within a scope the
/// new parent must be unique; when absent it is created, provided the path
/// down to it is unambiguous.
fn reattach(
    doc: &mut Document,
    src: &ElementPath,
    dest_parent: &ElementPath,
    dest: &ElementPath,
) -> Result<(), OpError> {
    let scope = parent_of(src).common_prefix(dest_parent);
    let doc_id = doc.id.clone();
    for route in locate(&doc.root, &scope) {
        let scope_inst = at_route_mut(&mut doc.root, &route);
        let mut moved = take_instances(scope_inst, src);
        if moved.is_empty() {
            continue;
        }
        for m in &mut moved {
            rebase_instances(m, src, dest);
        }
        let host = ensure_host(scope_inst, dest_parent, &doc_id)?;
        host.children_mut().expect("composite instance").extend(moved);
    }
    Ok(())
}

fn ensure_host<'a>(
    scope: &'a mut ElementInstance,
    dest_parent: &ElementPath,
    doc_id: &str,
) -> Result<&'a mut ElementInstance, OpError> {
    let found = locate(scope, dest_parent);
    match found.len() {
        1 => return Ok(at_route_mut(scope, &found[0])),
        0 => {}
        n => {
            return Err(OpError::AmbiguousReattachment {
                document: doc_id.to_string(),
                parent: dest_parent.clone(),
                count: n,
            })
        }
    }
    // create the missing chain below the scope
    let mut node = scope;
    let depth = node.type_path.len();
    for i in depth..dest_parent.len() {
        let next_path = ElementPath::from_segments(dest_parent.segments()[..=i].iter().cloned())
            .expect("segments of a valid path");
        let kids = node.children_mut().expect("composite instance");
        let hits: Vec<usize> = kids
            .iter()
            .enumerate()
            .filter(|(_, k)| k.type_path == next_path)
            .map(|(j, _)| j)
            .collect();
        let j = match hits.len() {
            0 => {
                kids.push(ElementInstance::composite(next_path, Vec::new()));
                kids.len() - 1
            }
            1 => hits[0],
            n => {
                return Err(OpError::AmbiguousReattachment {
                    document: doc_id.to_string(),
                    parent: next_path,
                    count: n,
                })
            }
        };
        node = &mut kids[j];
    }
    Ok(node)
}

/// Index routes (relative to `from`) of every instance typed `path`,
/// including `from` itself.
fn locate(from: &ElementInstance, path: &ElementPath) -> Vec<Vec<usize>> {
    fn go(node: &ElementInstance, path: &ElementPath, route: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if &node.type_path == path {
            out.push(route.clone());
            return;
        }
        if !path.starts_with(&node.type_path) {
            return;
        }
        for (i, c) in node.children().iter().enumerate() {
            route.push(i);
            go(c, path, route, out);
            route.pop();
        }
    }
    let mut out = Vec::new();
    go(from, path, &mut Vec::new(), &mut out);
    out
}

fn at_route_mut<'a>(mut node: &'a mut ElementInstance, route: &[usize]) -> &'a mut ElementInstance {
    for &i in route {
        node = &mut node.children_mut().expect("route follows composites")[i];
    }
    node
}

/// Detaches every descendant typed `path`, in document order.
fn take_instances(node: &mut ElementInstance, path: &ElementPath) -> Vec<ElementInstance> {
    let mut out = Vec::new();
    if let Some(kids) = node.children_mut() {
        let mut kept = Vec::with_capacity(kids.len());
        for mut k in kids.drain(..) {
            if &k.type_path == path {
                out.push(k);
            } else {
                if path.starts_with(&k.type_path) {
                    out.extend(take_instances(&mut k, path));
                }
                kept.push(k);
            }
        }
        *kids = kept;
    }
    out
}

fn drop_instances(node: &mut ElementInstance, path: &ElementPath) {
    take_instances(node, path);
}

pub(crate) fn rebase_instances(node: &mut ElementInstance, from: &ElementPath, to: &ElementPath) {
    if node.type_path.starts_with(from) {
        node.type_path = node.type_path.rebase(from, to);
    } else if !from.starts_with(&node.type_path) {
        return;
    }
    if let Payload::Children(kids) = &mut node.payload {
        for k in kids {
            rebase_instances(k, from, to);
        }
    }
}

/// Widens any type to `many` when some instance holds more than one
/// same-typed child of it.
pub(crate) fn widen_multiplicities(c: &mut Collection) {
    let mut max_seen: BTreeMap<ElementPath, usize> = BTreeMap::new();
    fn count(node: &ElementInstance, max_seen: &mut BTreeMap<ElementPath, usize>) {
        let mut local: BTreeMap<&ElementPath, usize> = BTreeMap::new();
        for k in node.children() {
            *local.entry(&k.type_path).or_default() += 1;
            count(k, max_seen);
        }
        for (p, n) in local {
            let e = max_seen.entry(p.clone()).or_default();
            *e = (*e).max(n);
        }
    }
    for doc in c.documents.values() {
        count(&doc.root, &mut max_seen);
    }
    for (p, n) in max_seen {
        if n > 1 {
            if let Some(t) = c.schema.get_mut(&p) {
                t.multiplicity = Multiplicity::Many;
            }
        }
    }
}

/// Orders each instance's children by the declared order of their types;
/// same-typed siblings keep their relative order.
pub(crate) fn normalize_order(node: &mut ElementInstance, schema: &Schema) {
    let ElementInstance { type_path, payload } = node;
    if let Payload::Children(kids) = payload {
        if let Some(ty) = schema.get(type_path) {
            kids.sort_by_key(|k| {
                k.name()
                    .and_then(|n| ty.child_index(n))
                    .unwrap_or(usize::MAX)
            });
        }
        for k in kids {
            normalize_order(k, schema);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical_serialize, validate_collection, Origin};

    fn p(s: &str) -> ElementPath {
        s.parse().unwrap()
    }

    fn atomic(name: &str, m: Multiplicity) -> ElementType {
        ElementType::leaf(name, ElementKind::Atomic, m)
    }

    fn origin() -> Origin {
        Origin {
            plugin: "test".into(),
            locator: "mem".into(),
        }
    }

    /// /Cases{Sex, Age, Diagnosis*, Dx*, Images*{Caption, Tech{Width, Height}}}
    fn medpix_like() -> Collection {
        let mut c = Collection::new();
        c.schema = Schema::with_children(vec![ElementType::composite(
            "Cases",
            Multiplicity::One,
            vec![
                atomic("Sex", Multiplicity::One),
                atomic("Age", Multiplicity::Optional),
                atomic("Diagnosis", Multiplicity::Many),
                atomic("Dx", Multiplicity::Many),
                ElementType::composite(
                    "Images",
                    Multiplicity::Many,
                    vec![
                        atomic("Caption", Multiplicity::One),
                        ElementType::composite(
                            "Tech",
                            Multiplicity::One,
                            vec![
                                atomic("Width", Multiplicity::One),
                                atomic("Height", Multiplicity::One),
                            ],
                        ),
                    ],
                ),
            ],
        )]);
        for d in 0..5 {
            let mut kids = vec![ElementInstance::text(p("/Cases/Sex"), if d % 2 == 0 { "F" } else { "M" })];
            if d != 3 {
                kids.push(ElementInstance::text(p("/Cases/Age"), format!("{}", 30 + d)));
            }
            for k in 0..2 {
                kids.push(ElementInstance::text(p("/Cases/Diagnosis"), format!("dx{d}-{k}")));
            }
            kids.push(ElementInstance::text(p("/Cases/Dx"), format!("alt{d}")));
            for i in 0..(d % 3) {
                kids.push(ElementInstance::composite(
                    p("/Cases/Images"),
                    vec![
                        ElementInstance::text(p("/Cases/Images/Caption"), format!("img{d}-{i}")),
                        ElementInstance::composite(
                            p("/Cases/Images/Tech"),
                            vec![
                                ElementInstance::text(p("/Cases/Images/Tech/Width"), "512"),
                                ElementInstance::text(p("/Cases/Images/Tech/Height"), "512"),
                            ],
                        ),
                    ],
                ));
            }
            c.insert_document(Document::new(
                format!("case{d}"),
                vec![ElementInstance::composite(p("/Cases"), kids)],
                origin(),
            ));
        }
        assert!(validate_collection(&c).is_empty());
        c
    }

    fn count_typed(c: &Collection, path: &str) -> usize {
        let path = p(path);
        c.documents.values().map(|d| d.instances_of(&path).len()).sum()
    }

    fn texts_of(doc: &Document) -> Vec<String> {
        let mut v: Vec<String> = doc
            .instances()
            .into_iter()
            .filter_map(|i| match &i.payload {
                Payload::Text(t) => Some(t.clone()),
                _ => None,
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn group_personal_data() {
        let c = medpix_like();
        let op = CurationOp::Group {
            paths: vec![p("/Cases/Sex"), p("/Cases/Age")],
            new_name: "Personal Data".into(),
        };
        let out = apply_op(&c, &op).unwrap();
        assert!(validate_collection(&out).is_empty());
        let pd = out.schema.get(&p("/Cases/Personal Data")).unwrap();
        assert_eq!(pd.kind, ElementKind::Composite);
        let names: Vec<_> = pd.children.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["Sex", "Age"]);
        assert_eq!(out.schema.root.children[0].children[0].name, "Personal Data");
        for (id, doc) in &out.documents {
            assert_eq!(texts_of(doc), texts_of(&c.documents[id]));
            assert_eq!(doc.instances_of(&p("/Cases/Personal Data")).len(), 1);
        }
        assert_eq!(out.version(), 1);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn identity_rename_only_bumps_version() {
        let c = medpix_like();
        let out = apply_op(
            &c,
            &CurationOp::Rename {
                path: p("/Cases/Sex"),
                new_name: "Sex".into(),
            },
        )
        .unwrap();
        let mut back = out.clone();
        back.schema.version = 0;
        back.log.clear();
        assert_eq!(back, c);
    }

    #[test]
    fn rename_rewrites_descendant_paths() {
        let c = medpix_like();
        let out = apply_op(
            &c,
            &CurationOp::Rename {
                path: p("/Cases/Images"),
                new_name: "Figures".into(),
            },
        )
        .unwrap();
        assert!(validate_collection(&out).is_empty());
        assert_eq!(
            count_typed(&out, "/Cases/Figures/Tech/Width"),
            count_typed(&c, "/Cases/Images/Tech/Width")
        );
    }

    #[test]
    fn merge_diagnosis_into_dx() {
        let c = medpix_like();
        // brute-force counts before
        assert_eq!(count_typed(&c, "/Cases/Diagnosis"), 10);
        assert_eq!(count_typed(&c, "/Cases/Dx"), 5);
        let out = apply_op(
            &c,
            &CurationOp::Merge {
                source: p("/Cases/Diagnosis"),
                target: p("/Cases/Dx"),
                new_name: None,
            },
        )
        .unwrap();
        assert!(validate_collection(&out).is_empty());
        assert_eq!(count_typed(&out, "/Cases/Dx"), 15);
        assert!(out.schema.get(&p("/Cases/Diagnosis")).is_none());
        assert_eq!(
            out.schema.get(&p("/Cases/Dx")).unwrap().multiplicity,
            Multiplicity::Many
        );
        let doc = &out.documents["case0"];
        let dx: Vec<_> = doc
            .instances_of(&p("/Cases/Dx"))
            .iter()
            .map(|i| match &i.payload {
                Payload::Text(t) => t.clone(),
                _ => unreachable!(),
            })
            .collect();
        // source instances come after the existing target instance
        assert_eq!(dx, ["alt0", "dx0-0", "dx0-1"]);
        for (id, doc) in &out.documents {
            assert_eq!(texts_of(doc), texts_of(&c.documents[id]));
        }
    }

    #[test]
    fn merge_rejects_kind_mismatch_without_side_effects() {
        let c = medpix_like();
        let before = canonical_serialize(&c).unwrap();
        let err = apply_op(
            &c,
            &CurationOp::Merge {
                source: p("/Cases/Sex"),
                target: p("/Cases/Images"),
                new_name: None,
            },
        )
        .unwrap_err();
        assert_eq!(err.rule(), "kind-mismatch");
        assert_eq!(canonical_serialize(&c).unwrap(), before);
    }

    #[test]
    fn remove_subtree_counts() {
        let c = medpix_like();
        let k = c.schema.get(&p("/Cases/Images/Tech")).unwrap().subtree_size();
        assert_eq!(k, 3);
        let out = apply_op(
            &c,
            &CurationOp::Remove {
                path: p("/Cases/Images/Tech"),
            },
        )
        .unwrap();
        assert_eq!(out.schema.type_count(), c.schema.type_count() - k);
        let removed: usize = c
            .documents
            .values()
            .flat_map(|d| d.instances_of(&p("/Cases/Images/Tech")))
            .map(ElementInstance::count)
            .sum();
        assert_eq!(out.instance_count(), c.instance_count() - removed);
        assert!(validate_collection(&out).is_empty());
    }

    #[test]
    fn remove_last_child_is_rejected() {
        let c = apply_op(
            &medpix_like(),
            &CurationOp::Remove {
                path: p("/Cases/Images/Caption"),
            },
        )
        .unwrap();
        let err = apply_op(
            &c,
            &CurationOp::Remove {
                path: p("/Cases/Images/Tech"),
            },
        )
        .unwrap_err();
        assert_eq!(err, OpError::EmptyComposite(p("/Cases/Images")));
    }

    #[test]
    fn move_within_repeated_parent_uses_local_scope() {
        let c = medpix_like();
        // each image keeps its own width
        let out = apply_op(
            &c,
            &CurationOp::Move {
                path: p("/Cases/Images/Tech/Width"),
                new_parent: p("/Cases/Images"),
                index: Some(0),
            },
        )
        .unwrap();
        assert!(validate_collection(&out).is_empty());
        assert_eq!(
            count_typed(&out, "/Cases/Images/Width"),
            count_typed(&c, "/Cases/Images/Tech/Width")
        );
        assert_eq!(out.schema.get(&p("/Cases/Images")).unwrap().children[0].name, "Width");
    }

    #[test]
    fn move_into_many_parent_with_several_instances_is_ambiguous() {
        let c = medpix_like();
        let err = apply_op(
            &c,
            &CurationOp::Move {
                path: p("/Cases/Sex"),
                new_parent: p("/Cases/Images"),
                index: None,
            },
        )
        .unwrap_err();
        assert_eq!(err.rule(), "ambiguous-reattachment");
    }

    #[test]
    fn move_cycle_is_rejected() {
        let c = medpix_like();
        let err = apply_op(
            &c,
            &CurationOp::Move {
                path: p("/Cases/Images"),
                new_parent: p("/Cases/Images/Tech"),
                index: None,
            },
        )
        .unwrap_err();
        assert!(matches!(err, OpError::Cycle { .. }));
    }

    #[test]
    fn move_reorders_siblings() {
        let c = medpix_like();
        let out = apply_op(
            &c,
            &CurationOp::Move {
                path: p("/Cases/Dx"),
                new_parent: p("/Cases"),
                index: Some(0),
            },
        )
        .unwrap();
        let cases = out.schema.get(&p("/Cases")).unwrap();
        assert_eq!(cases.children[0].name, "Dx");
        let doc = &out.documents["case1"];
        assert_eq!(doc.root.children()[0].children()[0].type_path, p("/Cases/Dx"));
    }

    #[test]
    fn move_to_root_creates_nothing_extra() {
        let c = medpix_like();
        let out = apply_op(
            &c,
            &CurationOp::Move {
                path: p("/Cases/Age"),
                new_parent: ElementPath::root(),
                index: None,
            },
        )
        .unwrap();
        assert!(validate_collection(&out).is_empty());
        assert_eq!(count_typed(&out, "/Age"), 4);
        assert_eq!(out.instance_count(), c.instance_count());
    }

    #[test]
    fn group_name_collision() {
        let c = medpix_like();
        let err = apply_op(
            &c,
            &CurationOp::Group {
                paths: vec![p("/Cases/Sex")],
                new_name: "Age".into(),
            },
        )
        .unwrap_err();
        assert_eq!(err.rule(), "name-collision");
    }

    #[test]
    fn recursive_names_on_different_branches_are_allowed() {
        let mut c = medpix_like();
        c = apply_op(
            &c,
            &CurationOp::Rename {
                path: p("/Cases/Images/Caption"),
                new_name: "Sex".into(),
            },
        )
        .unwrap();
        assert!(validate_collection(&c).is_empty());
        assert!(c.schema.contains(&p("/Cases/Sex")));
        assert!(c.schema.contains(&p("/Cases/Images/Sex")));
    }
}
