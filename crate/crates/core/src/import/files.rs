//! Structured-text files: one document per `.json` or `.xml` file in a
//! directory.
//!
//! JSON values map directly (objects to records, arrays to repeated
//! fields, scalars to text). A few single-key objects are special:
//! `{"$resource": "rel/path"}`, `{"$url": "https://..."}`,
//! `{"$document": "id"}` and `{"$quiz": {"stem", "choices", "answer"}}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::json::fields;
use super::{Fetched, ImportError, ImportParams, ImportPlugin, RawField, RawRecord, RawValue};
use crate::model::{guess_media_type, LinkTarget, Mcq, Resource};

pub struct FilesPlugin;

impl ImportPlugin for FilesPlugin {
    fn name(&self) -> &'static str {
        "files"
    }

    fn fetch(&self, params: &ImportParams) -> Result<Fetched, ImportError> {
        let dir = PathBuf::from(params.require("path")?);
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| ImportError::Unreachable(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && matches!(ext(p).as_deref(), Some("json" | "xml")))
            .collect();
        paths.sort();
        let mut out = Fetched::default();
        for p in paths {
            let id = sanitize_id(&p.file_stem().unwrap_or_default().to_string_lossy());
            let parsed = fs::read(&p)
                .map_err(|e| e.to_string())
                .and_then(|bytes| match ext(&p).as_deref() {
                    Some("xml") => xml_fields(&bytes),
                    _ => json_fields(&bytes, &dir, &mut out),
                });
            match parsed {
                Ok(tree) => out.records.push(RawRecord::new(id, p.display().to_string(), tree)),
                Err(e) => out.skip(format!("{}: {e}", p.display())),
            }
        }
        Ok(out)
    }
}

fn ext(p: &Path) -> Option<String> {
    p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

/// File names may hold characters document ids cannot.
pub(crate) fn sanitize_id(stem: &str) -> String {
    let s: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    s.trim_start_matches('.').chars().take(128).collect()
}

fn json_fields(bytes: &[u8], dir: &Path, out: &mut Fetched) -> Result<Vec<RawField>, String> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    let Value::Object(obj) = v else {
        return Err("top level is not an object".into());
    };
    let mut hook = |_: &str, v: &Value| -> Option<Result<RawValue, String>> {
        let obj = v.as_object().filter(|o| o.len() == 1)?;
        let (k, inner) = obj.iter().next()?;
        Some(match (k.as_str(), inner) {
            ("$resource", Value::String(rel)) => {
                let p = dir.join(rel);
                fs::read(&p)
                    .map_err(|e| format!("{}: {e}", p.display()))
                    .map(|bytes| {
                        let res = Resource::local(&bytes, guess_media_type(rel, &bytes));
                        RawValue::Resource(out.add_resource(res, Some(bytes)))
                    })
            }
            ("$url", Value::String(u)) => Ok(RawValue::Link(LinkTarget::url(u.clone()))),
            ("$document", Value::String(d)) => Ok(RawValue::Link(LinkTarget::document(d.clone()))),
            ("$quiz", q) => quiz(q).map(RawValue::Quiz),
            _ => return None,
        })
    };
    fields(&obj, &|k| k.to_string(), &mut hook)
}

fn quiz(v: &Value) -> Result<Mcq, String> {
    let stem = v.get("stem").and_then(Value::as_str).ok_or("quiz without stem")?;
    let choices = v
        .get("choices")
        .and_then(Value::as_array)
        .ok_or("quiz without choices")?
        .iter()
        .map(|c| c.as_str().map(str::to_string).ok_or("non-string choice"))
        .collect::<Result<Vec<_>, _>>()?;
    let answer = v.get("answer").and_then(Value::as_u64).ok_or("quiz without answer")?;
    Ok(Mcq {
        stem: stem.into(),
        choices,
        correct_index: answer as usize,
        explanation: v.get("explanation").and_then(Value::as_str).map(str::to_string),
    })
}

/// The document element becomes the single top-level field. Elements with
/// element children are records, others text; attributes become text
/// fields ahead of child elements.
fn xml_fields(bytes: &[u8]) -> Result<Vec<RawField>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    fn element(n: roxmltree::Node) -> RawField {
        let name = n.tag_name().name().to_string();
        let kids: Vec<_> = n.children().filter(|c| c.is_element()).collect();
        if kids.is_empty() && n.attributes().len() == 0 {
            let t = n.text().unwrap_or("").trim().to_string();
            return RawField::text(name, t);
        }
        let mut fields: Vec<RawField> = n
            .attributes()
            .map(|a| RawField::text(a.name(), a.value()))
            .collect();
        fields.extend(kids.into_iter().map(element));
        RawField::new(name, RawValue::Record(fields))
    }
    Ok(vec![element(doc.root_element())])
}
