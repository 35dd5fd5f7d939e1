//! Re-imports the pages of an exported content package. Every rendered
//! atomic value carries its instance path (`data-ipath`), which is enough
//! to rebuild the selected part of each document.

use std::path::Path;

use super::{Fetched, ImportError, ImportParams, ImportPlugin, RawField, RawRecord, RawValue};
use crate::model::InstancePath;
use crate::zipio;

pub struct PackagePlugin;

impl ImportPlugin for PackagePlugin {
    fn name(&self) -> &'static str {
        "package"
    }

    fn fetch(&self, params: &ImportParams) -> Result<Fetched, ImportError> {
        let path = params.require("path")?;
        let bytes = std::fs::read(path).map_err(|e| ImportError::Unreachable(format!("{path}: {e}")))?;
        fetch_package(&bytes, path)
    }
}

pub(crate) fn fetch_package(bytes: &[u8], locator: &str) -> Result<Fetched, ImportError> {
    let entries = zipio::read_zip(bytes).map_err(|e| ImportError::Malformed(format!("{locator}: {e}")))?;
    let manifest = entries
        .get("imsmanifest.xml")
        .ok_or_else(|| ImportError::Malformed(format!("{locator}: no imsmanifest.xml")))?;
    let manifest = std::str::from_utf8(manifest).map_err(|e| ImportError::Malformed(e.to_string()))?;
    let xml = roxmltree::Document::parse(manifest)
        .map_err(|e| ImportError::Malformed(format!("imsmanifest.xml: {e}")))?;
    let hrefs: Vec<&str> = xml
        .descendants()
        .filter(|n| n.has_tag_name("resource"))
        .filter_map(|n| n.attribute("href"))
        .filter(|h| h.starts_with("pages/"))
        .collect();

    let mut out = Fetched::default();
    for href in hrefs {
        let Some(page) = entries.get(href) else {
            out.skip(format!("{href}: missing from archive"));
            continue;
        };
        match page_record(page) {
            Ok((id, tree)) => {
                let id = id.unwrap_or_else(|| {
                    Path::new(href).file_stem().unwrap_or_default().to_string_lossy().into_owned()
                });
                out.records.push(RawRecord::new(id, format!("{locator}!{href}"), tree));
            }
            Err(e) => out.skip(format!("{href}: {e}")),
        }
    }
    Ok(out)
}

/// Builder node keyed by (name, ordinal); children keep first-seen order.
#[derive(Default)]
struct Node {
    text: Option<String>,
    kids: Vec<((String, usize), Node)>,
}

impl Node {
    fn insert(&mut self, path: &InstancePath, text: String) {
        let mut node = self;
        for step in path.steps() {
            let key = (step.name.clone(), step.ordinal);
            let i = match node.kids.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    node.kids.push((key, Node::default()));
                    node.kids.len() - 1
                }
            };
            node = &mut node.kids[i].1;
        }
        node.text = Some(text);
    }

    fn fields(&self) -> Vec<RawField> {
        let mut kids: Vec<&((String, usize), Node)> = self.kids.iter().collect();
        // same-named siblings in ordinal order, names in first-seen order
        let first_seen = |name: &str| self.kids.iter().position(|((n, _), _)| n == name);
        kids.sort_by_key(|((n, ord), _)| (first_seen(n), *ord));
        kids.into_iter()
            .map(|((name, _), node)| {
                let value = match &node.text {
                    Some(t) if node.kids.is_empty() => RawValue::Text(t.clone()),
                    _ => RawValue::Record(node.fields()),
                };
                RawField::new(name.clone(), value)
            })
            .collect()
    }
}

fn page_record(bytes: &[u8]) -> Result<(Option<String>, Vec<RawField>), String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..roxmltree::ParsingOptions::default()
    };
    let doc = roxmltree::Document::parse_with_options(text, opts).map_err(|e| e.to_string())?;
    let id = doc
        .descendants()
        .find(|n| n.has_tag_name("body"))
        .and_then(|b| b.attribute("data-doc"))
        .map(str::to_string);
    let mut root = Node::default();
    for n in doc.descendants().filter(|n| n.is_element()) {
        let Some(ipath) = n.attribute("data-ipath") else {
            continue;
        };
        let is_value = n
            .attribute("class")
            .is_some_and(|c| c.split_whitespace().any(|c| c == "v"));
        if !is_value {
            continue;
        }
        let path: InstancePath = ipath.parse().map_err(|e| format!("{ipath}: {e}"))?;
        let value: String = n
            .descendants()
            .filter(|d| d.is_text())
            .filter_map(|d| d.text())
            .collect();
        root.insert(&path, value);
    }
    if root.kids.is_empty() {
        return Err("page has no values".into());
    }
    Ok((id, root.fields()))
}
