//! Raw log records and their on-disk forms.
//!
//! Logs are newline-delimited JSON, one record per line, optionally gzip
//! compressed (detected from the magic bytes). CSV is accepted as an
//! alternative when the file name ends in `.csv` (or `.csv.gz`):
//!
//! - impressions: `timestamp,user_id,line_id,<field>...`, one column per field
//! - conversions: `timestamp,user_id,line_id,conv_type`
//! - lines: `line_id,conv_type`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token substituted for a schema field that an impression does not carry.
pub const MISSING: &str = "__missing__";

/// Field names served from the dedicated id columns rather than `fields`.
pub const USER_FIELD: &str = "User_ID";
pub const LINE_FIELD: &str = "Line_ID";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpressionRecord {
    pub timestamp: i64,
    pub user_id: String,
    pub line_id: String,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

impl ImpressionRecord {
    /// Raw categorical value of a schema field.
    pub fn value(&self, field: &str) -> &str {
        match field {
            USER_FIELD => &self.user_id,
            LINE_FIELD => &self.line_id,
            _ => self.fields.get(field).map_or(MISSING, String::as_str),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionRecord {
    pub timestamp: i64,
    pub user_id: String,
    pub line_id: String,
    pub conv_type: String,
}

/// A line and the single conversion type it tracks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRecord {
    pub line_id: String,
    pub conv_type: String,
}

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let gz = reader
        .fill_buf()
        .map_err(|e| Error::io(path, e))?
        .starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(reader)))
    } else {
        Box::new(reader)
    })
}

fn is_csv(path: &Path) -> bool {
    let name = path.to_string_lossy();
    name.ends_with(".csv") || name.ends_with(".csv.gz")
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::format("log record", format!("{}:{}: {e}", path.display(), lineno + 1))
        })?);
    }
    Ok(out)
}

/// Writes one JSON document per line; gzip-compressed when the path ends in `.gz`.
pub fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w: Box<dyn Write> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzEncoder::new(BufWriter::new(file), Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let inner: Box<dyn Read> = Box::new(open(path)?);
    Ok(csv::Reader::from_reader(inner))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format("csv log", format!("{}: {e}", path.display()))
}

pub fn read_impressions(path: &Path) -> Result<Vec<ImpressionRecord>> {
    if !is_csv(path) {
        return read_ndjson(path);
    }
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format("csv log", format!("missing column `{name}`")))
    };
    let (ts, user, line) = (col("timestamp")?, col("user_id")?, col("line_id")?);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let timestamp = row[ts]
            .parse()
            .map_err(|_| Error::format("csv log", format!("bad timestamp `{}`", &row[ts])))?;
        let fields = headers
            .iter()
            .zip(row.iter())
            .enumerate()
            .filter(|(i, _)| ![ts, user, line].contains(i))
            .map(|(_, (h, v))| (h.to_string(), v.to_string()))
            .collect();
        out.push(ImpressionRecord {
            timestamp,
            user_id: row[user].to_string(),
            line_id: row[line].to_string(),
            fields,
        });
    }
    Ok(out)
}

fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv_reader(path)?
        .deserialize()
        .map(|r| r.map_err(|e| csv_err(path, e)))
        .collect()
}

pub fn read_conversions(path: &Path) -> Result<Vec<ConversionRecord>> {
    if is_csv(path) {
        read_csv_rows(path)
    } else {
        read_ndjson(path)
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<LineRecord>> {
    if is_csv(path) {
        read_csv_rows(path)
    } else {
        read_ndjson(path)
    }
}
