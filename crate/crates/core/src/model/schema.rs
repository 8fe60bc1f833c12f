use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ModelConfig, ModelKind};
use super::instance::SparseInstance;
use crate::error::{Error, Result};

/// Name of the field appended for conversion-type-as-field models.
pub const CONV_TYPE_FIELD: &str = "Conversion_Type_ID";

/// Field list and per-field feature dictionaries.
///
/// Field `k` owns the contiguous index block `[offset(k), offset(k + 1))`.
/// The first index of every block is the field's out-of-vocabulary feature;
/// dictionary values follow in the order given at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct FieldSchema {
    fields: Vec<String>,
    values: Vec<Vec<String>>,
    type_names: Vec<String>,
    offsets: Vec<u32>,
    lookup: Vec<HashMap<String, u32>>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    fields: Vec<String>,
    values: Vec<Vec<String>>,
    type_names: Vec<String>,
}

impl TryFrom<SchemaRepr> for FieldSchema {
    type Error = Error;
    fn try_from(r: SchemaRepr) -> Result<Self> {
        FieldSchema::new(r.fields, r.values, r.type_names)
    }
}

impl From<FieldSchema> for SchemaRepr {
    fn from(s: FieldSchema) -> Self {
        SchemaRepr {
            fields: s.fields,
            values: s.values,
            type_names: s.type_names,
        }
    }
}

/// Field names and cardinalities; enough to check a model against a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDigest {
    pub field_names: Vec<String>,
    pub cardinalities: Vec<usize>,
}

impl FieldSchema {
    pub fn new(
        fields: Vec<String>,
        values: Vec<Vec<String>>,
        type_names: Vec<String>,
    ) -> Result<Self> {
        if fields.len() != values.len() {
            return Err(Error::format(
                "schema",
                format!("{} fields but {} dictionaries", fields.len(), values.len()),
            ));
        }
        if type_names.is_empty() {
            return Err(Error::format("schema", "no conversion types"));
        }
        let mut offsets = Vec::with_capacity(fields.len() + 1);
        let mut lookup = Vec::with_capacity(fields.len());
        let mut next = 0u32;
        for (name, vals) in fields.iter().zip(&values) {
            offsets.push(next);
            let mut dict = HashMap::with_capacity(vals.len());
            for (j, v) in vals.iter().enumerate() {
                if dict.insert(v.clone(), next + 1 + j as u32).is_some() {
                    return Err(Error::format(
                        "schema",
                        format!("duplicate value `{v}` in field `{name}`"),
                    ));
                }
            }
            next += 1 + vals.len() as u32;
            lookup.push(dict);
        }
        offsets.push(next);
        Ok(FieldSchema {
            fields,
            values,
            type_names,
            offsets,
            lookup,
        })
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    /// M: total number of base features, OOV slots included.
    pub fn num_features(&self) -> usize {
        *self.offsets.last().unwrap_or(&0) as usize
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.values.iter().map(|v| v.len() + 1).collect()
    }

    pub fn offset(&self, field: usize) -> u32 {
        self.offsets[field]
    }

    pub fn oov_index(&self, field: usize) -> u32 {
        self.offsets[field]
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }

    pub fn type_id(&self, name: &str) -> Option<u32> {
        self.type_names.iter().position(|t| t == name).map(|t| t as u32)
    }

    /// Feature index of `value` in `field`, falling back to the field's OOV index.
    pub fn feature_index(&self, field: usize, value: &str) -> u32 {
        self.lookup[field]
            .get(value)
            .copied()
            .unwrap_or(self.offsets[field])
    }

    pub fn is_oov(&self, feature: u32) -> bool {
        self.offsets[..self.fields.len()].binary_search(&feature).is_ok()
    }

    /// F(i): the field a feature index belongs to.
    pub fn field_of(&self, feature: u32) -> Option<usize> {
        if feature as usize >= self.num_features() {
            return None;
        }
        Some(self.offsets.partition_point(|&o| o <= feature) - 1)
    }

    /// Human-readable name of a base feature.
    pub fn feature_name(&self, feature: u32) -> Option<String> {
        let f = self.field_of(feature)?;
        let local = (feature - self.offsets[f]) as usize;
        Some(match local {
            0 => format!("{}=<oov>", self.fields[f]),
            j => format!("{}={}", self.fields[f], self.values[f][j - 1]),
        })
    }

    pub fn model_config(&self, kind: ModelKind, embed_dim: usize) -> Result<ModelConfig> {
        ModelConfig::new(kind, self.cardinalities(), self.num_types(), embed_dim)
    }

    /// Copy of `inst` with the conversion-type feature appended as field N.
    pub fn augment_ctf(&self, inst: &SparseInstance) -> SparseInstance {
        let mut out = inst.clone();
        out.active.push((self.num_features() + inst.conv_type as usize) as u32);
        out
    }

    pub fn digest(&self) -> SchemaDigest {
        SchemaDigest {
            field_names: self.fields.clone(),
            cardinalities: self.cardinalities(),
        }
    }

    /// Stable 64-bit identifier derived from the full dictionary contents.
    pub fn schema_id(&self) -> u64 {
        let repr = SchemaRepr::from(self.clone());
        let bytes = serde_json::to_vec(&repr).expect("schema serializes");
        let hash = Sha256::digest(&bytes);
        u64::from_le_bytes(hash[..8].try_into().expect("8 bytes"))
    }
}

impl SchemaDigest {
    /// Digest with generated field names for models built without a schema.
    pub fn for_config(config: &ModelConfig) -> Self {
        SchemaDigest {
            field_names: (0..config.num_fields()).map(|f| format!("field_{f}")).collect(),
            cardinalities: config.field_sizes.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FieldSchema {
        FieldSchema::new(
            vec!["a".into(), "b".into()],
            vec![vec!["x".into(), "y".into()], vec!["z".into()]],
            vec!["Lead".into(), "Purchase".into()],
        )
        .unwrap()
    }

    #[test]
    fn blocks_start_with_oov() {
        let s = schema();
        assert_eq!(s.num_features(), 5);
        assert_eq!(s.cardinalities(), vec![3, 2]);
        assert_eq!(s.feature_index(0, "x"), 1);
        assert_eq!(s.feature_index(0, "y"), 2);
        assert_eq!(s.feature_index(0, "never seen"), 0);
        assert_eq!(s.feature_index(1, "z"), 4);
        assert_eq!(s.feature_index(1, "x"), 3);
        assert!(s.is_oov(3));
        assert!(!s.is_oov(4));
    }

    #[test]
    fn field_of_is_total_on_dense_range() {
        let s = schema();
        let fields: Vec<_> = (0..5).map(|i| s.field_of(i).unwrap()).collect();
        assert_eq!(fields, vec![0, 0, 0, 1, 1]);
        assert_eq!(s.field_of(5), None);
        assert_eq!(s.feature_name(2).unwrap(), "a=y");
    }

    #[test]
    fn ctf_augmentation_uses_type_block() {
        let s = schema();
        let inst = SparseInstance::new(vec![1, 4], 1, true);
        let aug = s.augment_ctf(&inst);
        assert_eq!(aug.active, vec![1, 4, 6]);
        let config = s.model_config(ModelKind::FwfmCtf2, 2).unwrap();
        assert_eq!(config.type_feature(1), 6);
        assert!(aug.rows(&config).is_ok());
    }

    #[test]
    fn json_round_trip_rebuilds_lookup() {
        let s = schema();
        let json = serde_json::to_string(&s).unwrap();
        let back: FieldSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.feature_index(0, "y"), 2);
        assert_eq!(back.schema_id(), s.schema_id());
    }

    #[test]
    fn rejects_duplicate_values() {
        let r = FieldSchema::new(
            vec!["a".into()],
            vec![vec!["x".into(), "x".into()]],
            vec!["t".into()],
        );
        assert!(r.is_err());
    }
}
