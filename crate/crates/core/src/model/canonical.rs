//! Canonical text encoding: compact JSON, object keys sorted
//! lexicographically, UTF-8, one trailing LF.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use super::collection::Collection;
use super::validate::{validate_collection, ValidationReport};

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("collection is invalid ({} violations)", .0.len())]
    Invalid(ValidationReport),
    #[error("encoding error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Encodes any serializable value canonically.
pub fn to_canonical<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    write_value(&v, &mut out);
    out.push(b'\n');
    Ok(out)
}

pub fn from_canonical<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, serde_json::Error> {
    serde_json::from_slice(bytes)
}

fn write_value(v: &Value, out: &mut Vec<u8>) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push(b'{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(k, out);
                out.push(b':');
                write_value(&map[k], out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out);
            }
            out.push(b']');
        }
        Value::String(s) => write_string(s, out),
        other => out.extend_from_slice(other.to_string().as_bytes()),
    }
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    // serde_json's string escaping is stable and minimal
    out.extend_from_slice(
        serde_json::to_string(s)
            .expect("string serialization cannot fail")
            .as_bytes(),
    );
}

/// Canonical bytes of a valid collection. Equal collections produce equal
/// bytes.
pub fn canonical_serialize(c: &Collection) -> Result<Vec<u8>, CanonicalError> {
    let report = validate_collection(c);
    if !report.is_empty() {
        return Err(CanonicalError::Invalid(report));
    }
    Ok(to_canonical(c)?)
}

pub fn canonical_deserialize(bytes: &[u8]) -> Result<Collection, serde_json::Error> {
    from_canonical(bytes)
}
