//! Delimited tabular files: one flat document per row, one atomic child per
//! header column.

use super::{Fetched, ImportError, ImportParams, ImportPlugin, RawField, RawRecord};
use crate::model::check_name;

pub struct TablePlugin;

impl ImportPlugin for TablePlugin {
    fn name(&self) -> &'static str {
        "table"
    }

    /// Parameters: `path`, optional `delimiter` (default `,`) and optional
    /// `id_column` whose values become document ids.
    fn fetch(&self, params: &ImportParams) -> Result<Fetched, ImportError> {
        let path = params.require("path")?;
        let delimiter = match params.get("delimiter") {
            None => b',',
            Some("\\t" | "tab") => b'\t',
            Some(d) if d.len() == 1 => d.as_bytes()[0],
            Some(d) => return Err(ImportError::Param(format!("bad delimiter {d:?}"))),
        };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .from_path(path)
            .map_err(|e| ImportError::Unreachable(format!("{path}: {e}")))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| ImportError::Malformed(format!("{path}: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        for h in &headers {
            check_name(h).map_err(|e| ImportError::Malformed(format!("column {h:?}: {e}")))?;
        }
        let id_col = match params.get("id_column") {
            None => None,
            Some(c) => Some(
                headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| ImportError::Param(format!("no column {c:?}")))?,
            ),
        };
        let mut out = Fetched::default();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = match row {
                Ok(r) if r.len() == headers.len() => r,
                Ok(r) => {
                    out.skip(format!("{path}:{line}: {} fields, expected {}", r.len(), headers.len()));
                    continue;
                }
                Err(e) => {
                    out.skip(format!("{path}:{line}: {e}"));
                    continue;
                }
            };
            // an empty cell is an absent value
            let tree = headers
                .iter()
                .zip(row.iter())
                .filter(|(_, v)| !v.is_empty())
                .map(|(h, v)| RawField::text(h.clone(), v))
                .collect();
            let id = id_col.map(|c| row[c].to_string()).unwrap_or_default();
            out.records.push(RawRecord::new(id, format!("{path}:{line}"), tree));
        }
        Ok(out)
    }
}
