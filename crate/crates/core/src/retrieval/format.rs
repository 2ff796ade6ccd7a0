//! On-disk feature database formats.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "MOMF" | version u16 | method u8 | order u16 | dim u32 | count u32
//! count × ( id_len u16 | id utf-8 | class u16 | dim × f64 )
//! crc32 u32   -- IEEE CRC32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureDatabase, Record};
use crate::error::{Error, Result};
use crate::feature::Method;

pub const DB_MAGIC: &[u8; 4] = b"MOMF";
pub const DB_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 1 + 2 + 4 + 4;

pub(super) fn encode(db: &FeatureDatabase) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + db.len() * (db.dim * 8 + 16) + 4);
    out.extend_from_slice(DB_MAGIC);
    out.extend_from_slice(&DB_VERSION.to_le_bytes());
    out.push(db.method.tag());
    out.extend_from_slice(&db.order.to_le_bytes());
    out.extend_from_slice(&(db.dim as u32).to_le_bytes());
    out.extend_from_slice(&(db.len() as u32).to_le_bytes());
    for r in &db.records {
        let id_len = u16::try_from(r.id.len())
            .map_err(|_| Error::InvalidArgument(format!("id too long: {}", r.id)))?;
        let class = u16::try_from(r.class_label)
            .map_err(|_| Error::InvalidArgument(format!("class {} exceeds u16", r.class_label)))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(r.id.as_bytes());
        out.extend_from_slice(&class.to_le_bytes());
        for v in &r.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<FeatureDatabase> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != DB_MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut c = Cursor { buf: body, pos: 4 };
    let version = c.u16()?;
    if version != DB_VERSION {
        return Err(Error::Version(version));
    }
    let tag = c.take(1)?[0];
    let method =
        Method::from_tag(tag).ok_or_else(|| Error::Corrupt(format!("unknown method tag {tag}")))?;
    let order = c.u16()? as usize;
    let dim = c.u32()? as usize;
    let count = c.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(body.len() / (dim * 8 + 4).max(1)));
    for _ in 0..count {
        let id_len = c.u16()? as usize;
        let id = std::str::from_utf8(c.take(id_len)?)
            .map_err(|_| Error::Corrupt("record id is not utf-8".into()))?
            .to_owned();
        let class_label = c.u16()? as usize;
        let values = c
            .take(dim * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        records.push(Record {
            id,
            class_label,
            values,
        });
    }
    if c.pos != body.len() {
        return Err(Error::Corrupt(format!(
            "{} trailing bytes after last record",
            body.len() - c.pos
        )));
    }
    FeatureDatabase::from_records(method, order, dim, records)
}

/// Writes the binary format atomically (temp file + rename).
pub fn save_db(db: &FeatureDatabase, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode(db)?)
}

pub fn load_db(path: impl AsRef<Path>) -> Result<FeatureDatabase> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Serialize, Deserialize)]
struct JsonDb {
    format: String,
    version: u16,
    method: Method,
    order: u16,
    dim: usize,
    records: Vec<Record>,
}

impl FeatureDatabase {
    /// JSON mirror of the binary format. Floats use the shortest decimal
    /// that parses back to the identical `f64`.
    pub fn to_json(&self) -> Result<String> {
        let doc = JsonDb {
            format: "MOMF".into(),
            version: DB_VERSION,
            method: self.method,
            order: self.order,
            dim: self.dim,
            records: self.records.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsonDb = serde_json::from_str(text)?;
        if doc.version != DB_VERSION {
            return Err(Error::Version(doc.version));
        }
        FeatureDatabase::from_records(doc.method, doc.order as usize, doc.dim, doc.records)
    }
}

pub fn save_db_json(db: &FeatureDatabase, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), db.to_json()?.as_bytes())
}

pub fn load_db_json(path: impl AsRef<Path>) -> Result<FeatureDatabase> {
    let path = path.as_ref();
    FeatureDatabase::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.partial",
        path.extension().and_then(|e| e.to_str()).unwrap_or("tmp")
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureDatabase {
        let records = (0..6)
            .map(|k| Record {
                id: format!("obj{}__{}", k / 3 + 1, k % 3),
                class_label: k / 3,
                values: vec![k as f64 * 0.1, -1.0 / 3.0, f64::MIN_POSITIVE, 1e300],
            })
            .collect();
        FeatureDatabase::from_records(Method::Zm, 7, 4, records).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let db = sample();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.momf");
        save_db(&db, &p).unwrap();
        let back = load_db(&p).unwrap();
        assert_eq!(back, db);
        for (a, b) in db.records().iter().zip(back.records()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"MOMF");
        assert_eq!(bytes[6], Method::Zm.tag());
    }

    #[test]
    fn truncated_file_rejected() {
        let bytes = encode(&sample()).unwrap();
        for cut in [3, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = encode(&sample()).unwrap();
        bytes[30] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(Error::Checksum { .. })));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode(&sample()).unwrap();
        bytes[4] = 9;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Version(9))));
    }

    #[test]
    fn json_round_trip() {
        let db = sample();
        let back = FeatureDatabase::from_json(&db.to_json().unwrap()).unwrap();
        assert_eq!(back, db);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn json_round_trip_random(vals in prop::collection::vec(
                prop::num::f64::POSITIVE | prop::num::f64::NEGATIVE | prop::num::f64::NORMAL
                    | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..40)) {
                let dim = vals.len();
                let db = FeatureDatabase::from_records(
                    Method::Elm, 3, dim,
                    vec![Record { id: "x".into(), class_label: 2, values: vals.clone() }],
                ).unwrap();
                let back = FeatureDatabase::from_json(&db.to_json().unwrap()).unwrap();
                for (a, b) in vals.iter().zip(&back.records()[0].values) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
                prop_assert_eq!(decode(&encode(&db).unwrap()).unwrap(), db);
            }
        }
    }
}
