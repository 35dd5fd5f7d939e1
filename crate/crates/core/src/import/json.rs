//! JSON to raw-record conversion shared by the JSON-speaking plugins.

use serde_json::{Map, Value};

use super::{RawField, RawValue};

/// Intercepts a value before generic conversion. Gets the field key the
/// value sits under; array items are offered individually after the whole
/// array was declined.
pub(crate) type Hook<'a> = dyn FnMut(&str, &Value) -> Option<Result<RawValue, String>> + 'a;

/// `camelCase` or `snake_case` keys to `PascalCase` element names.
pub(crate) fn pascal(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    let mut upper = true;
    for ch in key.chars() {
        if ch == '_' || ch == '-' {
            upper = true;
        } else if upper {
            out.extend(ch.to_uppercase());
            upper = false;
        } else {
            out.push(ch);
        }
    }
    out
}

/// Converts the members of a JSON object into fields, in source order.
pub(crate) fn fields(
    obj: &Map<String, Value>,
    name: &dyn Fn(&str) -> String,
    hook: &mut Hook,
) -> Result<Vec<RawField>, String> {
    let mut out = Vec::with_capacity(obj.len());
    for (k, v) in obj {
        if let Some(value) = convert(k, v, name, hook, false)? {
            out.push(RawField::new(name(k), value));
        }
    }
    Ok(out)
}

fn convert(
    key: &str,
    v: &Value,
    name: &dyn Fn(&str) -> String,
    hook: &mut Hook,
    in_list: bool,
) -> Result<Option<RawValue>, String> {
    if let Some(r) = hook(key, v) {
        return r.map(Some);
    }
    Ok(Some(match v {
        Value::Null => return Ok(None),
        Value::Bool(b) => RawValue::Text(b.to_string()),
        Value::Number(n) => RawValue::Text(n.to_string()),
        Value::String(s) => RawValue::Text(s.clone()),
        Value::Array(items) => {
            if in_list {
                return Err(format!("{key}: nested arrays are not supported"));
            }
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                if let Some(x) = convert(key, item, name, hook, true)? {
                    out.push(x);
                }
            }
            RawValue::List(out)
        }
        Value::Object(obj) => RawValue::Record(fields(obj, name, hook)?),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pascal_case() {
        assert_eq!(pascal("caseId"), "CaseId");
        assert_eq!(pascal("image_technical_details"), "ImageTechnicalDetails");
        assert_eq!(pascal("Findings"), "Findings");
    }

    #[test]
    fn keeps_source_order() {
        let v: Value = serde_json::from_str(r#"{"zeta":"1","alpha":{"b":2,"a":[true,null]}}"#).unwrap();
        let f = fields(v.as_object().unwrap(), &|k| k.to_string(), &mut |_, _| None).unwrap();
        assert_eq!(f[0].name, "zeta");
        let RawValue::Record(inner) = &f[1].value else {
            panic!("expected record")
        };
        assert_eq!(inner[0].name, "b");
        assert_eq!(inner[1].value, RawValue::List(vec![RawValue::Text("true".into())]));
    }
}
