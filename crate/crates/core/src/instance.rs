//! Labeled and unlabeled examples, and the schema they are checked against.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a class label in `[0, num_classes)`.
pub type ClassIdx = u32;

/// Index of an attribute in `[0, num_attributes)`.
pub type AttributeId = u32;

/// Attribute values of one instance.
///
/// Categorical values are stored as their value index (`0.0`, `1.0`, ...).
/// Attributes absent from a sparse vector have the implicit value `0.0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Attributes {
    Dense(Vec<f64>),
    /// `(attribute id, value)` pairs with strictly increasing ids.
    Sparse(Vec<(AttributeId, f64)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub attributes: Attributes,
    pub label: Option<ClassIdx>,
    pub weight: f64,
}

impl Instance {
    pub fn dense(values: Vec<f64>, label: Option<ClassIdx>) -> Self {
        Self {
            attributes: Attributes::Dense(values),
            label,
            weight: 1.0,
        }
    }

    pub fn sparse(pairs: Vec<(AttributeId, f64)>, label: Option<ClassIdx>) -> Self {
        Self {
            attributes: Attributes::Sparse(pairs),
            label,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.attributes, Attributes::Sparse(_))
    }

    /// Value of `attribute`, `0.0` when a sparse instance does not carry it.
    pub fn value(&self, attribute: AttributeId) -> f64 {
        match &self.attributes {
            Attributes::Dense(values) => values[attribute as usize],
            Attributes::Sparse(pairs) => pairs
                .binary_search_by_key(&attribute, |&(id, _)| id)
                .map(|i| pairs[i].1)
                .unwrap_or(0.0),
        }
    }

    /// Iterates the attributes this instance actually carries: all of them
    /// for dense instances, only the stored pairs for sparse ones.
    pub fn present(&self) -> impl Iterator<Item = (AttributeId, f64)> + '_ {
        let (dense, sparse) = match &self.attributes {
            Attributes::Dense(values) => (Some(values), None),
            Attributes::Sparse(pairs) => (None, Some(pairs)),
        };
        let dense = dense
            .into_iter()
            .flat_map(|v| v.iter().enumerate().map(|(i, &x)| (i as AttributeId, x)));
        let sparse = sparse.into_iter().flat_map(|p| p.iter().copied());
        dense.chain(sparse)
    }

    /// Number of attributes carried (dense length or sparse pair count).
    pub fn present_len(&self) -> usize {
        match &self.attributes {
            Attributes::Dense(values) => values.len(),
            Attributes::Sparse(pairs) => pairs.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    /// Nominal attribute with values `0..values`.
    Categorical { values: u32 },
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeKind>,
    pub num_classes: u32,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeKind>, num_classes: u32) -> Self {
        Self {
            attributes,
            num_classes,
        }
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn kind(&self, attribute: AttributeId) -> AttributeKind {
        self.attributes[attribute as usize]
    }

    /// Checks the instance invariants against this schema.
    pub fn check(&self, instance: &Instance) -> Result<(), SchemaViolation> {
        let m = self.attributes.len();
        match &instance.attributes {
            Attributes::Dense(values) => {
                if values.len() != m {
                    return Err(SchemaViolation::DenseLength {
                        expected: m,
                        found: values.len(),
                    });
                }
            }
            Attributes::Sparse(pairs) => {
                let mut prev: Option<AttributeId> = None;
                for &(id, _) in pairs {
                    if id as usize >= m {
                        return Err(SchemaViolation::AttributeOutOfRange { id, m });
                    }
                    if prev.is_some_and(|p| p >= id) {
                        return Err(SchemaViolation::UnsortedSparse { id });
                    }
                    prev = Some(id);
                }
            }
        }
        for (id, value) in instance.present() {
            if !value.is_finite() {
                return Err(SchemaViolation::NonFinite { id });
            }
            if let AttributeKind::Categorical { values } = self.kind(id) {
                if value < 0.0 || value.fract() != 0.0 || value >= values as f64 {
                    return Err(SchemaViolation::CategoryOutOfRange { id, value });
                }
            }
        }
        if let Some(label) = instance.label {
            if label >= self.num_classes {
                return Err(SchemaViolation::LabelOutOfRange {
                    label,
                    classes: self.num_classes,
                });
            }
        }
        if !(instance.weight >= 0.0) || !instance.weight.is_finite() {
            return Err(SchemaViolation::Weight(instance.weight));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SchemaViolation {
    #[error("dense instance has {found} values, schema has {expected} attributes")]
    DenseLength { expected: usize, found: usize },
    #[error("sparse attribute id {id} is not below {m}")]
    AttributeOutOfRange { id: AttributeId, m: usize },
    #[error("sparse attribute ids are not strictly increasing at id {id}")]
    UnsortedSparse { id: AttributeId },
    #[error("attribute {id} has a non-finite value")]
    NonFinite { id: AttributeId },
    #[error("categorical attribute {id} has invalid value {value}")]
    CategoryOutOfRange { id: AttributeId, value: f64 },
    #[error("label {label} is not below {classes}")]
    LabelOutOfRange { label: ClassIdx, classes: u32 },
    #[error("weight {0} is negative or not finite")]
    Weight(f64),
}

/// Globally unique, never reused identifier of a tree leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeafId(pub u64);

impl fmt::Display for LeafId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_missing_reads_as_zero() {
        let x = Instance::sparse(vec![(2, 1.0), (7, 3.5)], Some(0));
        assert_eq!(x.value(7), 3.5);
        assert_eq!(x.value(3), 0.0);
        assert_eq!(x.present().collect::<Vec<_>>(), vec![(2, 1.0), (7, 3.5)]);
    }

    #[test]
    fn schema_rejects_bad_instances() {
        let schema = Schema::new(
            vec![AttributeKind::Categorical { values: 2 }, AttributeKind::Numeric],
            2,
        );
        assert!(schema.check(&Instance::dense(vec![1.0, 0.3], Some(1))).is_ok());
        assert!(matches!(
            schema.check(&Instance::dense(vec![1.0], Some(1))),
            Err(SchemaViolation::DenseLength { .. })
        ));
        assert!(matches!(
            schema.check(&Instance::dense(vec![2.0, 0.3], Some(1))),
            Err(SchemaViolation::CategoryOutOfRange { .. })
        ));
        assert!(matches!(
            schema.check(&Instance::dense(vec![0.0, 0.3], Some(2))),
            Err(SchemaViolation::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            schema.check(&Instance::sparse(vec![(1, 1.0), (0, 1.0)], None)),
            Err(SchemaViolation::UnsortedSparse { .. })
        ));
        assert!(matches!(
            schema.check(&Instance::sparse(vec![(5, 1.0)], None)),
            Err(SchemaViolation::AttributeOutOfRange { .. })
        ));
        assert!(matches!(
            schema.check(&Instance::dense(vec![0.0, 0.3], Some(0)).with_weight(-1.0)),
            Err(SchemaViolation::Weight(_))
        ));
    }
}
