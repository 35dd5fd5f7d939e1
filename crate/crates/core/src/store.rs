//! On-disk collection store (`.clv`), either a directory or a zip archive.
//!
//! ```text
//! meta                  format marker and log base version
//! schema                canonical schema
//! docs/<docid>          one canonical document per file
//! resources/index       canonical resource records
//! resources/<id>.<ext>  local resource bytes
//! annotations           canonical annotation records
//! log/ops.cdsl          applied curation ops, one per line
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_document_id, from_canonical, to_canonical, Annotation, BlobStore, Collection, Document,
    LogEntry, Resource, ResourceId, ResourceKind, Schema,
};
use crate::ops::{parse_script, print_script};
use crate::zipio::{self, Entries};

pub const FORMAT: &str = "clv";
pub const FORMAT_VERSION: u32 = 1;
/// Resume state of an interrupted import, kept inside directory stores.
pub const CURSOR_FILE: &str = ".import-cursor";

/// A collection together with the bytes of its local resources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub collection: Collection,
    pub blobs: BlobStore,
}

impl Bundle {
    pub fn new(collection: Collection, blobs: BlobStore) -> Self {
        Bundle { collection, blobs }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{entry}: {message}")]
    Format { entry: String, message: String },
    #[error("zip: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("{} is locked by another process", .0.display())]
    Locked(PathBuf),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn format(entry: &str, message: impl ToString) -> Self {
        StoreError::Format {
            entry: entry.to_string(),
            message: message.to_string(),
        }
    }

    /// True for failures of the underlying file system rather than of the
    /// store contents.
    pub fn is_io(&self) -> bool {
        matches!(self, StoreError::Io { .. } | StoreError::Locked(_))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format: String,
    format_version: u32,
    /// Schema version before the first logged op.
    log_base: u64,
}

/// Encodes a bundle as store entries.
pub fn to_entries(b: &Bundle) -> Result<BTreeMap<String, Vec<u8>>, StoreError> {
    let c = &b.collection;
    let enc = |entry: &str, r: Result<Vec<u8>, serde_json::Error>| {
        r.map_err(|e| StoreError::format(entry, e))
    };
    let mut out = Entries::new();
    let log_base = c.log.first().map_or(c.schema.version, |e| e.pre_version);
    let meta = Meta {
        format: FORMAT.into(),
        format_version: FORMAT_VERSION,
        log_base,
    };
    out.insert("meta".into(), enc("meta", to_canonical(&meta))?);
    out.insert("schema".into(), enc("schema", to_canonical(&c.schema))?);
    for (id, doc) in &c.documents {
        check_document_id(id).map_err(|m| StoreError::format(&format!("docs/{id}"), m))?;
        let name = format!("docs/{id}");
        out.insert(name.clone(), enc(&name, to_canonical(doc))?);
    }
    let index: Vec<&Resource> = c.resources.values().collect();
    out.insert("resources/index".into(), enc("resources/index", to_canonical(&index))?);
    for r in c.resources.values() {
        if r.kind != ResourceKind::LocalFile {
            continue;
        }
        let bytes = b
            .blobs
            .get(&r.id)
            .ok_or_else(|| StoreError::format(&r.locator, "resource bytes missing"))?;
        out.insert(r.locator.clone(), bytes.to_vec());
    }
    let annotations: Vec<&Annotation> = c.annotations.values().collect();
    out.insert("annotations".into(), enc("annotations", to_canonical(&annotations))?);
    let ops: Vec<_> = c.log.iter().map(|e| e.op.clone()).collect();
    out.insert("log/ops.cdsl".into(), print_script(&ops).into_bytes());
    Ok(out)
}

/// Decodes store entries. Resource bytes are checked against their ids.
pub fn from_entries(entries: &BTreeMap<String, Vec<u8>>) -> Result<Bundle, StoreError> {
    fn get<'a>(e: &'a BTreeMap<String, Vec<u8>>, name: &str) -> Result<&'a [u8], StoreError> {
        e.get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| StoreError::format(name, "missing"))
    }
    fn dec<T: serde::de::DeserializeOwned>(name: &str, bytes: &[u8]) -> Result<T, StoreError> {
        from_canonical(bytes).map_err(|e| StoreError::format(name, e))
    }

    let meta: Meta = dec("meta", get(entries, "meta")?)?;
    if meta.format != FORMAT || meta.format_version != FORMAT_VERSION {
        return Err(StoreError::format(
            "meta",
            format!("unsupported format {} v{}", meta.format, meta.format_version),
        ));
    }
    let schema: Schema = dec("schema", get(entries, "schema")?)?;
    let mut c = Collection {
        schema,
        ..Collection::default()
    };
    for (name, bytes) in entries.range("docs/".to_string()..) {
        let Some(id) = name.strip_prefix("docs/") else {
            break;
        };
        let doc: Document = dec(name, bytes)?;
        if doc.id != id {
            return Err(StoreError::format(name, format!("holds document {:?}", doc.id)));
        }
        c.documents.insert(doc.id.clone(), doc);
    }
    let index: Vec<Resource> = dec("resources/index", get(entries, "resources/index")?)?;
    let mut blobs = BlobStore::new();
    for r in index {
        if r.kind == ResourceKind::LocalFile {
            let bytes = get(entries, &r.locator)?;
            if ResourceId::for_bytes(bytes) != r.id {
                return Err(StoreError::format(&r.locator, "content does not match resource id"));
            }
            blobs.insert(bytes.to_vec());
        }
        c.resources.insert(r.id.clone(), r);
    }
    let annotations: Vec<Annotation> = dec("annotations", get(entries, "annotations")?)?;
    c.annotations = annotations.into_iter().map(|a| (a.id.clone(), a)).collect();
    let text = std::str::from_utf8(get(entries, "log/ops.cdsl")?)
        .map_err(|e| StoreError::format("log/ops.cdsl", e))?;
    let script = parse_script(text).map_err(|e| StoreError::format("log/ops.cdsl", e))?;
    c.log = script
        .ops
        .into_iter()
        .enumerate()
        .map(|(i, op)| LogEntry {
            op,
            pre_version: meta.log_base + i as u64,
            post_version: meta.log_base + i as u64 + 1,
        })
        .collect();
    Ok(Bundle::new(c, blobs))
}

/// Serializes a bundle as a deterministic `.clv` zip.
pub fn to_zip(b: &Bundle) -> Result<Vec<u8>, StoreError> {
    Ok(zipio::write_zip(&to_entries(b)?, Some(0))?)
}

pub fn from_zip(bytes: &[u8]) -> Result<Bundle, StoreError> {
    from_entries(&zipio::read_zip(bytes)?)
}

/// Loads a store from a directory or a zip file.
pub fn load(path: &Path) -> Result<Bundle, StoreError> {
    let md = fs::metadata(path).map_err(|e| StoreError::io(path, e))?;
    if md.is_file() {
        let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
        return from_zip(&bytes);
    }
    let mut entries = Entries::new();
    read_tree(path, path, &mut entries)?;
    from_entries(&entries)
}

fn read_tree(root: &Path, dir: &Path, out: &mut Entries) -> Result<(), StoreError> {
    let rd = fs::read_dir(dir).map_err(|e| StoreError::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| StoreError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        let ft = entry.file_type().map_err(|e| StoreError::io(&path, e))?;
        if ft.is_dir() {
            read_tree(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walk stays below root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let bytes = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
            out.insert(rel, bytes);
        }
    }
    Ok(())
}

/// Saves a bundle. An existing regular file, or a path ending in `.zip`, is
/// written as a zip archive; anything else becomes a directory store.
/// Directory stores are updated file by file with atomic renames, stale
/// documents and blobs are removed, and dot files (cursor, lock) are kept.
pub fn save(path: &Path, b: &Bundle) -> Result<(), StoreError> {
    let as_zip = path.is_file() || path.extension().is_some_and(|e| e == "zip");
    if as_zip {
        return write_atomic(path, &to_zip(b)?);
    }
    let entries = to_entries(b)?;
    fs::create_dir_all(path).map_err(|e| StoreError::io(path, e))?;
    // stores are small enough that comparing bytes is cheaper than
    // rewriting unchanged blobs
    let mut existing = Entries::new();
    read_tree(path, path, &mut existing)?;
    for (name, bytes) in &entries {
        let target = path.join(name);
        if existing.get(name).is_some_and(|old| old == bytes) {
            continue;
        }
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| StoreError::io(parent, e))?;
        }
        write_atomic(&target, bytes)?;
    }
    for name in existing.keys().filter(|n| !entries.contains_key(*n)) {
        let target = path.join(name);
        fs::remove_file(&target).map_err(|e| StoreError::io(&target, e))?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

/// Reads the import cursor of a directory store, if any.
pub fn read_cursor(path: &Path) -> Result<Option<serde_json::Value>, StoreError> {
    let p = path.join(CURSOR_FILE);
    match fs::read(&p) {
        Ok(bytes) => from_canonical(&bytes)
            .map(Some)
            .map_err(|e| StoreError::format(CURSOR_FILE, e)),
        Err(e) if e.kind() == io::ErrorKind::NotFound || e.kind() == io::ErrorKind::NotADirectory => {
            Ok(None)
        }
        Err(e) => Err(StoreError::io(&p, e)),
    }
}

/// Writes (`Some`) or clears (`None`) the import cursor of a directory store.
pub fn write_cursor(path: &Path, cursor: Option<&serde_json::Value>) -> Result<(), StoreError> {
    let p = path.join(CURSOR_FILE);
    match cursor {
        Some(v) => {
            let bytes = to_canonical(v).map_err(|e| StoreError::format(CURSOR_FILE, e))?;
            write_atomic(&p, &bytes)
        }
        None => match fs::remove_file(&p) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(StoreError::io(&p, e)),
            _ => Ok(()),
        },
    }
}

/// Advisory exclusive lock on a store, released on drop. The lock file is a
/// sibling `<name>.lock`, so a store can be locked before it exists.
#[derive(Debug)]
pub struct StoreLock {
    _file: fs::File,
}

impl StoreLock {
    pub fn acquire(path: &Path) -> Result<Self, StoreError> {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".lock");
        let lock_path = path.with_file_name(name);
        if let Some(parent) = lock_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| StoreError::io(parent, e))?;
        }
        let file = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| StoreError::io(&lock_path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(StoreLock { _file: file }),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(path.to_path_buf())),
            Err(fs::TryLockError::Error(e)) => Err(StoreError::io(&lock_path, e)),
        }
    }
}
