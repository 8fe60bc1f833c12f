use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};

/// One impression in multi-field categorical form: exactly one active
/// feature per base field, in field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseInstance {
    pub active: Vec<u32>,
    pub conv_type: u32,
    pub label: bool,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl SparseInstance {
    pub fn new(active: Vec<u32>, conv_type: u32, label: bool) -> Self {
        SparseInstance {
            active,
            conv_type,
            label,
            weight: 1.0,
        }
    }

    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }

    /// Checks the instance against `config` and returns the embedding rows the
    /// model reads, with the conversion-type feature appended for CTF kinds.
    ///
    /// CTF instances may be passed either plain (N features) or already
    /// augmented (N+1, last entry the type feature).
    pub fn rows<'a>(&'a self, config: &ModelConfig) -> Result<Rows<'a>> {
        if self.conv_type as usize >= config.num_types {
            return Err(Error::ConvTypeOutOfRange {
                conv_type: self.conv_type,
                num_types: config.num_types,
            });
        }
        let n = config.num_fields();
        let ctf = config.kind.is_ctf();
        let base = match self.active.len() {
            len if len == n => &self.active[..],
            len if ctf && len == n + 1 => {
                let expected = config.type_feature(self.conv_type);
                if self.active[n] != expected {
                    return Err(Error::NotFieldAligned {
                        position: n,
                        feature: self.active[n],
                    });
                }
                &self.active[..n]
            }
            got => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got,
                })
            }
        };
        let mut lo = 0u32;
        for (position, (&feature, &size)) in base.iter().zip(&config.field_sizes).enumerate() {
            let hi = lo + size as u32;
            if feature < lo || feature >= hi {
                return Err(Error::NotFieldAligned { position, feature });
            }
            lo = hi;
        }
        Ok(Rows {
            base,
            extra: ctf.then(|| config.type_feature(self.conv_type)),
        })
    }
}

/// Embedding rows of one instance as seen by a particular model kind.
#[derive(Clone, Copy, Debug)]
pub struct Rows<'a> {
    base: &'a [u32],
    extra: Option<u32>,
}

impl<'a> Rows<'a> {
    #[inline]
    pub fn len(&self) -> usize {
        self.base.len() + usize::from(self.extra.is_some())
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, field: usize) -> usize {
        match self.base.get(field) {
            Some(&r) => r as usize,
            None => self.extra.expect("field index out of range") as usize,
        }
    }

    /// Row of the appended conversion-type feature, if any.
    pub fn type_row(&self) -> Option<usize> {
        self.extra.map(|r| r as usize)
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }
}
