//! Model persistence.
//!
//! Binary layout (little endian):
//!
//! ```text
//! "mtfwfm-v1\n"
//! u32 header length, header JSON {version, config, schema}
//! 4 x (u64 length, length x f64)   bias, embeddings, main_weights, interactions
//! ```
//!
//! Floats are written via their IEEE bit patterns, so a binary round trip is
//! bit-exact. The JSON form carries the same content in one document.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::ModelParams;
use super::schema::SchemaDigest;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "mtfwfm-v1";
const MAGIC: &[u8] = b"mtfwfm-v1\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: SchemaDigest,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: String,
    config: ModelConfig,
    schema: SchemaDigest,
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    version: String,
    config: ModelConfig,
    schema: SchemaDigest,
    bias: Vec<f64>,
    embeddings: Vec<f64>,
    main_weights: Vec<f64>,
    interactions: Vec<f64>,
}

impl ModelFile {
    pub fn new(params: ModelParams, schema: SchemaDigest) -> Result<Self> {
        let file = ModelFile { schema, params };
        file.validate()?;
        Ok(file)
    }

    /// Wraps parameters with a generated schema digest.
    pub fn anonymous(params: ModelParams) -> Self {
        ModelFile {
            schema: SchemaDigest::for_config(&params.config),
            params,
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.config.validate()?;
        self.params.check_shapes()?;
        if self.schema.cardinalities != self.params.config.field_sizes
            || self.schema.field_names.len() != self.schema.cardinalities.len()
        {
            return Err(Error::format(
                "model file",
                "schema digest does not match the model's field sizes",
            ));
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            version: FORMAT_VERSION.to_string(),
            config: self.params.config.clone(),
            schema: self.schema.clone(),
        })?;
        let mut buf = Vec::with_capacity(
            MAGIC.len() + 4 + header.len() + 8 * (4 + self.params.scalar_count()),
        );
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        for tensor in self.params.tensors() {
            buf.extend_from_slice(&(tensor.len() as u64).to_le_bytes());
            for v in tensor {
                buf.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        w.write_all(&buf)
            .map_err(|e| Error::io("<model writer>", e))
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(MAGIC.len())? != MAGIC {
            return Err(Error::format("model file", "missing mtfwfm-v1 tag"));
        }
        let header_len = u32::from_le_bytes(cur.array()?) as usize;
        let header: Header = serde_json::from_slice(cur.take(header_len)?)?;
        if header.version != FORMAT_VERSION {
            return Err(Error::format(
                "model file",
                format!("unsupported version {}", header.version),
            ));
        }
        let mut params = ModelParams::zeros(header.config)?;
        for tensor in params.tensors_mut() {
            let len = u64::from_le_bytes(cur.array()?) as usize;
            if len != tensor.len() {
                return Err(Error::ShapeMismatch(format!(
                    "stored tensor has {len} entries, config implies {}",
                    tensor.len()
                )));
            }
            for v in tensor.iter_mut() {
                *v = f64::from_bits(u64::from_le_bytes(cur.array()?));
            }
        }
        if cur.pos != bytes.len() {
            return Err(Error::format("model file", "trailing bytes"));
        }
        ModelFile::new(params, header.schema)
    }

    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        Ok(serde_json::to_string(&JsonDoc {
            version: FORMAT_VERSION.to_string(),
            config: p.config.clone(),
            schema: self.schema.clone(),
            bias: p.bias.clone(),
            embeddings: p.embeddings.clone(),
            main_weights: p.main_weights.clone(),
            interactions: p.interactions.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: JsonDoc = serde_json::from_str(s)?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::format(
                "model file",
                format!("unsupported version {}", doc.version),
            ));
        }
        ModelFile::new(
            ModelParams {
                config: doc.config,
                bias: doc.bias,
                embeddings: doc.embeddings,
                main_weights: doc.main_weights,
                interactions: doc.interactions,
            },
            doc.schema,
        )
    }

    /// Writes JSON when the path ends in `.json`, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) {
            self.to_json()?.into_bytes()
        } else {
            self.to_binary()
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(MAGIC) {
            ModelFile::from_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::format("model file", "neither binary nor UTF-8 JSON"))?;
            ModelFile::from_json(&text)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("model file", "truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
}
