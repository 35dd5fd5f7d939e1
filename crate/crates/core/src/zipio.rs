//! Deterministic zip reading and writing shared by the store and exporters.

use std::collections::BTreeMap;
use std::io::{Cursor, Read, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

pub(crate) type Entries = BTreeMap<String, Vec<u8>>;

/// Converts unix seconds to a zip timestamp. Zip cannot represent dates
/// before 1980 or after 2107, so the value is clamped into that range.
pub(crate) fn zip_time(epoch: i64) -> DateTime {
    let t = time::OffsetDateTime::from_unix_timestamp(epoch)
        .unwrap_or(time::OffsetDateTime::UNIX_EPOCH);
    let year = t.year().clamp(1980, 2107) as u16;
    let (month, day, hour, minute, second) = if t.year() < 1980 {
        (1, 1, 0, 0, 0)
    } else if t.year() > 2107 {
        (12, 31, 23, 59, 58)
    } else {
        (u8::from(t.month()), t.day(), t.hour(), t.minute(), t.second())
    };
    DateTime::from_date_and_time(year, month, day, hour, minute, second)
        .unwrap_or_else(|_| DateTime::default())
}

/// Writes entries in sorted path order with constant metadata. `epoch` of
/// `None` stamps the current time.
pub(crate) fn write_zip(entries: &Entries, epoch: Option<i64>) -> zip::result::ZipResult<Vec<u8>> {
    let stamp = zip_time(epoch.unwrap_or_else(|| time::OffsetDateTime::now_utc().unix_timestamp()));
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(stamp)
        .unix_permissions(0o644);
    let mut w = ZipWriter::new(Cursor::new(Vec::new()));
    for (name, bytes) in entries {
        w.start_file(name.as_str(), options)?;
        w.write_all(bytes)?;
    }
    Ok(w.finish()?.into_inner())
}

/// Reads every file entry. Directory entries are skipped; names that would
/// escape the archive root are rejected.
pub(crate) fn read_zip(bytes: &[u8]) -> zip::result::ZipResult<Entries> {
    let mut archive = ZipArchive::new(Cursor::new(bytes))?;
    let mut out = BTreeMap::new();
    for i in 0..archive.len() {
        let mut f = archive.by_index(i)?;
        if f.is_dir() {
            continue;
        }
        if f.enclosed_name().is_none() {
            return Err(zip::result::ZipError::InvalidArchive("entry escapes archive root".into()));
        }
        let name = f.name()?.into_owned();
        let mut buf = Vec::with_capacity(f.size() as usize);
        f.read_to_end(&mut buf)?;
        out.insert(name, buf);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_entries_same_bytes() {
        let mut e = Entries::new();
        e.insert("b.txt".into(), b"bee".to_vec());
        e.insert("a/x.txt".into(), b"ex".to_vec());
        let one = write_zip(&e, Some(0)).unwrap();
        let two = write_zip(&e, Some(0)).unwrap();
        assert_eq!(one, two);
        assert_eq!(read_zip(&one).unwrap(), e);
    }

    #[test]
    fn epoch_is_clamped() {
        let t = zip_time(0);
        assert_eq!((t.year(), t.month(), t.day()), (1980, 1, 1));
        let t = zip_time(1_700_000_000);
        assert_eq!(t.year(), 2023);
    }
}
