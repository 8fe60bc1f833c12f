//! Binary instance files and the JSON schema sidecar.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "MTFI"
//! version    u32      1
//! schema_id  u64
//! fields     u32      N
//! count      u64
//! records    count × (N × u32 feature, u8 conv_type, u8 label)
//! ```
//!
//! Instances are stored without the conversion-type field; CTF models add it
//! at scoring time. Instance weights are not stored and load as 1.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{FieldSchema, SparseInstance};

pub const MAGIC: &[u8; 4] = b"MTFI";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub schema_id: u64,
    pub num_fields: usize,
    pub count: usize,
}

pub fn write_instances<W: Write>(
    mut w: W,
    schema_id: u64,
    num_fields: usize,
    data: &[SparseInstance],
) -> Result<()> {
    let io = |e| Error::io("<instances>", e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&schema_id.to_le_bytes()).map_err(io)?;
    w.write_all(&(num_fields as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(data.len() as u64).to_le_bytes()).map_err(io)?;
    let mut buf = Vec::with_capacity(4 * num_fields + 2);
    for inst in data {
        if inst.active.len() != num_fields {
            return Err(Error::DimensionMismatch {
                expected: num_fields,
                got: inst.active.len(),
            });
        }
        let t = u8::try_from(inst.conv_type).map_err(|_| Error::ConvTypeOutOfRange {
            conv_type: inst.conv_type,
            num_types: 256,
        })?;
        buf.clear();
        for &f in &inst.active {
            buf.extend_from_slice(&f.to_le_bytes());
        }
        buf.push(t);
        buf.push(inst.label as u8);
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_instances<R: Read>(mut r: R) -> Result<(DatasetHeader, Vec<SparseInstance>)> {
    let bad = |detail: String| Error::format("instance file", detail);
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head)
        .map_err(|_| bad("truncated header".into()))?;
    if &head[..4] != MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(head[i..i + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let header = DatasetHeader {
        schema_id: u64_at(8),
        num_fields: u32_at(16) as usize,
        count: u64_at(20) as usize,
    };
    let rec_len = 4 * header.num_fields + 2;
    let mut body = Vec::new();
    r.read_to_end(&mut body)
        .map_err(|e| Error::io("<instances>", e))?;
    if body.len() != rec_len * header.count {
        return Err(bad(format!(
            "expected {} record bytes, found {}",
            rec_len * header.count,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(rec_len)
        .map(|rec| {
            let active = rec[..4 * header.num_fields]
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            let label = match rec[rec_len - 1] {
                0 => false,
                1 => true,
                b => return Err(bad(format!("label byte {b}"))),
            };
            Ok(SparseInstance::new(active, rec[rec_len - 2] as u32, label))
        })
        .collect::<Result<_>>()?;
    Ok((header, data))
}

pub fn save_instances(
    path: &Path,
    schema: &FieldSchema,
    data: &[SparseInstance],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_instances(BufWriter::new(file), schema.schema_id(), schema.num_fields(), data)
}

/// Loads an instance file and checks it was encoded with `schema`.
pub fn load_instances(path: &Path, schema: &FieldSchema) -> Result<Vec<SparseInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (header, data) = read_instances(BufReader::new(file))?;
    if header.schema_id != schema.schema_id() {
        return Err(Error::format(
            "instance file",
            format!(
                "{} was encoded with schema {:016x}, not {:016x}",
                path.display(),
                header.schema_id,
                schema.schema_id()
            ),
        ));
    }
    if header.num_fields != schema.num_fields() {
        return Err(Error::DimensionMismatch {
            expected: schema.num_fields(),
            got: header.num_fields,
        });
    }
    Ok(data)
}

pub fn save_schema(path: &Path, schema: &FieldSchema) -> Result<()> {
    let json = serde_json::to_vec_pretty(schema)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_schema(path: &Path) -> Result<FieldSchema> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(
            n in 1usize..6,
            rows in prop::collection::vec((prop::collection::vec(any::<u32>(), 6), 0u32..4, any::<bool>()), 0..40),
            id: u64,
        ) {
            let data: Vec<_> = rows
                .into_iter()
                .map(|(a, t, l)| SparseInstance::new(a[..n].to_vec(), t, l))
                .collect();
            let mut buf = Vec::new();
            write_instances(&mut buf, id, n, &data).unwrap();
            let (h, back) = read_instances(&buf[..]).unwrap();
            prop_assert_eq!(h, DatasetHeader { schema_id: id, num_fields: n, count: data.len() });
            prop_assert_eq!(back, data);
        }
    }

    #[test]
    fn corrupt_files_rejected() {
        let data = vec![SparseInstance::new(vec![1, 2], 0, true)];
        let mut buf = Vec::new();
        write_instances(&mut buf, 7, 2, &data).unwrap();
        assert!(read_instances(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_instances(&extra[..]).is_err());
        let mut magic = buf.clone();
        magic[0] = b'X';
        assert!(read_instances(&magic[..]).is_err());
        let mut label = buf;
        *label.last_mut().unwrap() = 2;
        assert!(read_instances(&label[..]).is_err());
        assert!(write_instances(Vec::new(), 0, 3, &data).is_err());
    }

    #[test]
    fn schema_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let s1 = FieldSchema::new(vec!["a".into()], vec![vec!["x".into()]], vec!["t".into()]).unwrap();
        let s2 = FieldSchema::new(vec!["a".into()], vec![vec!["y".into()]], vec!["t".into()]).unwrap();
        let path = dir.path().join("d.bin");
        save_instances(&path, &s1, &[SparseInstance::new(vec![1], 0, false)]).unwrap();
        assert_eq!(load_instances(&path, &s1).unwrap().len(), 1);
        assert!(load_instances(&path, &s2).is_err());
        let sp = dir.path().join("schema.json");
        save_schema(&sp, &s1).unwrap();
        assert_eq!(load_schema(&sp).unwrap(), s1);
    }
}
