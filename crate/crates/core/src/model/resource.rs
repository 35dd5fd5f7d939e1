//! Resources (local blobs and external URLs), content ids and image annotations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// First 16 hex characters of the SHA-256 digest of `bytes`.
pub fn content_id(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub String);

impl ResourceId {
    pub fn for_bytes(bytes: &[u8]) -> Self {
        ResourceId(content_id(bytes))
    }

    pub fn for_url(url: &str) -> Self {
        ResourceId(content_id(url.as_bytes()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_well_formed(&self) -> bool {
        self.0.len() == 16 && self.0.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResourceKind {
    LocalFile,
    ExternalUrl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub kind: ResourceKind,
    pub media_type: String,
    pub locator: String,
    pub byte_size: u64,
    /// Pixel dimensions, when the resource is a decodable image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageSize>,
}

impl Resource {
    /// Builds a local resource from its bytes. The locator is the blob's
    /// place inside a collection store.
    pub fn local(bytes: &[u8], media_type: &str) -> Self {
        let id = ResourceId::for_bytes(bytes);
        let image = if media_type.starts_with("image/") {
            imagesize::blob_size(bytes).ok().and_then(|s| {
                Some(ImageSize {
                    width: u32::try_from(s.width).ok()?,
                    height: u32::try_from(s.height).ok()?,
                })
            })
        } else {
            None
        };
        Resource {
            locator: format!("resources/{}.{}", id, extension_for(media_type)),
            id,
            kind: ResourceKind::LocalFile,
            media_type: media_type.to_string(),
            byte_size: bytes.len() as u64,
            image,
        }
    }

    pub fn external(url: &str, media_type: &str) -> Self {
        Resource {
            id: ResourceId::for_url(url),
            kind: ResourceKind::ExternalUrl,
            media_type: media_type.to_string(),
            locator: url.to_string(),
            byte_size: 0,
            image: None,
        }
    }

    pub fn is_image(&self) -> bool {
        self.media_type.starts_with("image/")
    }

    pub fn file_name(&self) -> String {
        format!("{}.{}", self.id, extension_for(&self.media_type))
    }
}

pub fn extension_for(media_type: &str) -> &'static str {
    match media_type {
        "image/png" => "png",
        "image/jpeg" => "jpg",
        "image/gif" => "gif",
        "image/webp" => "webp",
        "image/svg+xml" => "svg",
        "application/pdf" => "pdf",
        "text/plain" => "txt",
        "text/html" => "html",
        "video/mp4" => "mp4",
        _ => "bin",
    }
}

/// Guesses a media type from a file name or URL, falling back to sniffing
/// the leading bytes.
pub fn guess_media_type(name: &str, bytes: &[u8]) -> &'static str {
    let lower = name.to_ascii_lowercase();
    let ext = lower.rsplit('.').next().unwrap_or("");
    match ext {
        "png" => return "image/png",
        "jpg" | "jpeg" => return "image/jpeg",
        "gif" => return "image/gif",
        "webp" => return "image/webp",
        "svg" => return "image/svg+xml",
        "pdf" => return "application/pdf",
        "txt" => return "text/plain",
        "mp4" => return "video/mp4",
        _ => {}
    }
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        "image/png"
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        "image/jpeg"
    } else if bytes.starts_with(b"GIF8") {
        "image/gif"
    } else if bytes.starts_with(b"%PDF") {
        "application/pdf"
    } else {
        "application/octet-stream"
    }
}

/// Rectangle in pixel coordinates of the stored image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Region {
    pub fn fits(&self, size: ImageSize) -> bool {
        u64::from(self.x) + u64::from(self.w) <= u64::from(size.width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(size.height)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl std::str::FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected x,y,w,h, got {s:?}"));
        }
        let n = |i: usize| {
            parts[i]
                .parse::<u32>()
                .map_err(|e| format!("bad coordinate {:?}: {e}", parts[i]))
        };
        Ok(Region {
            x: n(0)?,
            y: n(1)?,
            w: n(2)?,
            h: n(3)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub resource_id: ResourceId,
    pub region: Region,
    pub comment: String,
    pub author: String,
}

impl Annotation {
    /// Annotation ids derive from what is annotated, so re-adding the same
    /// annotation is idempotent.
    pub fn derive_id(resource_id: &ResourceId, region: Region, comment: &str) -> String {
        let key = format!("{resource_id}\n{region}\n{comment}");
        format!("ann-{}", content_id(key.as_bytes()))
    }
}

/// Resource bytes keyed by resource id. Cheap to clone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlobStore {
    blobs: BTreeMap<ResourceId, Arc<Vec<u8>>>,
}

impl BlobStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `bytes` and returns their id. Identical bytes are stored once.
    pub fn insert(&mut self, bytes: Vec<u8>) -> ResourceId {
        let id = ResourceId::for_bytes(&bytes);
        self.blobs.entry(id.clone()).or_insert_with(|| Arc::new(bytes));
        id
    }

    pub fn get(&self, id: &ResourceId) -> Option<&[u8]> {
        self.blobs.get(id).map(|b| b.as_slice())
    }

    pub fn contains(&self, id: &ResourceId) -> bool {
        self.blobs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ResourceId, &[u8])> {
        self.blobs.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn extend(&mut self, other: &BlobStore) {
        for (k, v) in &other.blobs {
            self.blobs.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&ResourceId) -> bool) {
        self.blobs.retain(|k, _| keep(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_id_of_empty_input() {
        // sha256("") = e3b0c44298fc1c149afbf4c8996fb924...
        assert_eq!(content_id(b""), "e3b0c44298fc1c14");
        assert_eq!(content_id(b"abc"), "ba7816bf8f01cfea");
    }

    #[test]
    fn identical_bytes_share_one_blob() {
        let mut store = BlobStore::new();
        let a = store.insert(vec![1, 2, 3]);
        let b = store.insert(vec![1, 2, 3]);
        let c = store.insert(vec![3, 2, 1]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn region_parsing_and_bounds() {
        let r: Region = "120,80,40,30".parse().unwrap();
        assert!(r.fits(ImageSize { width: 160, height: 110 }));
        assert!(!r.fits(ImageSize { width: 159, height: 110 }));
        assert!("1,2,3".parse::<Region>().is_err());
        assert!("1,2,3,-4".parse::<Region>().is_err());
    }

    #[test]
    fn annotation_ids_are_deterministic() {
        let rid = ResourceId::for_bytes(b"img");
        let r = Region { x: 1, y: 2, w: 3, h: 4 };
        assert_eq!(
            Annotation::derive_id(&rid, r, "note"),
            Annotation::derive_id(&rid, r, "note")
        );
        assert_ne!(
            Annotation::derive_id(&rid, r, "note"),
            Annotation::derive_id(&rid, r, "other")
        );
    }
}
