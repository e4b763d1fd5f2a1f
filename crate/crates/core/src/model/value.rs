//! Runtime payloads exchanged between ports.
//!
//! Values are immutable; arrays, text and composites sit behind `Arc`, so a
//! value handed to several consumers is shared rather than copied.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::types::DataType;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Text(Arc<str>),
    Array(ArrayValue),
    Composite(Arc<BTreeMap<String, Value>>),
    Opaque(Arc<[u8]>),
}

/// Flat row-major storage with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayValue {
    shape: Arc<[usize]>,
    data: ArrayData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    Integer(Arc<[i64]>),
    Real(Arc<[f64]>),
    Boolean(Arc<[bool]>),
    /// Elements of any non-scalar-numeric type (text, arrays, composites, opaques).
    Values(Arc<[Value]>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Integer(d) => d.len(),
            ArrayData::Real(d) => d.len(),
            ArrayData::Boolean(d) => d.len(),
            ArrayData::Values(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shape {shape:?} holds {expected} elements but data has {actual}")]
pub struct ShapeError {
    pub shape: Vec<usize>,
    pub expected: usize,
    pub actual: usize,
}

impl ArrayValue {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self, ShapeError> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || expected != data.len() {
            return Err(ShapeError {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(ArrayValue {
            shape: shape.into(),
            data,
        })
    }

    pub fn vector_real(data: impl Into<Arc<[f64]>>) -> Self {
        let data = data.into();
        ArrayValue {
            shape: vec![data.len()].into(),
            data: ArrayData::Real(data),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn as_real(&self) -> Option<&Arc<[f64]>> {
        match &self.data {
            ArrayData::Real(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<&Arc<[i64]>> {
        match &self.data {
            ArrayData::Integer(d) => Some(d),
            _ => None,
        }
    }
}

impl Value {
    pub fn text(s: impl AsRef<str>) -> Self {
        Value::Text(Arc::from(s.as_ref()))
    }

    pub fn composite<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<String>,
    {
        Value::Composite(Arc::new(fields.into_iter().map(|(k, v)| (k.into(), v)).collect()))
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Value::Integer(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&ArrayValue> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    /// Checks that the payload matches `ty` exactly; the error names the
    /// offending location.
    pub fn conforms_to(&self, ty: &DataType) -> Result<(), String> {
        match (self, ty) {
            (Value::Integer(_), DataType::Integer64)
            | (Value::Real(_), DataType::Real64)
            | (Value::Boolean(_), DataType::Boolean)
            | (Value::Text(_), DataType::Text)
            | (Value::Opaque(_), DataType::Opaque { .. }) => Ok(()),
            (Value::Array(array), DataType::Array { element, rank, extents }) => {
                if array.shape.len() != *rank as usize {
                    return Err(format!(
                        "array of rank {} where rank {rank} expected",
                        array.shape.len()
                    ));
                }
                if let Some(extents) = extents {
                    for (dim, (have, want)) in array.shape.iter().zip(extents).enumerate() {
                        if let Some(want) = want {
                            if *have as u64 != *want {
                                return Err(format!("extent {have} in dimension {dim} where {want} expected"));
                            }
                        }
                    }
                }
                match (&array.data, element.as_ref()) {
                    (ArrayData::Integer(_), DataType::Integer64)
                    | (ArrayData::Real(_), DataType::Real64)
                    | (ArrayData::Boolean(_), DataType::Boolean) => Ok(()),
                    (ArrayData::Values(values), ty)
                        if !matches!(ty, DataType::Integer64 | DataType::Real64 | DataType::Boolean) =>
                    {
                        for (i, v) in values.iter().enumerate() {
                            v.conforms_to(ty).map_err(|e| format!("[{i}]: {e}"))?;
                        }
                        Ok(())
                    }
                    _ => Err(format!("array storage does not hold {element} elements")),
                }
            }
            (Value::Composite(map), DataType::Composite { fields }) => {
                if map.len() != fields.len() {
                    return Err(format!(
                        "composite has {} fields where {} expected",
                        map.len(),
                        fields.len()
                    ));
                }
                for (name, ty) in fields {
                    let v = map.get(name).ok_or_else(|| format!("missing field {name}"))?;
                    v.conforms_to(ty).map_err(|e| format!("{name}: {e}"))?;
                }
                Ok(())
            }
            (v, ty) => Err(format!("{} value where {ty} expected", v.kind_name())),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Integer(_) => "integer64",
            Value::Real(_) => "real64",
            Value::Boolean(_) => "boolean",
            Value::Text(_) => "text",
            Value::Array(_) => "array",
            Value::Composite(_) => "composite",
            Value::Opaque(_) => "opaque",
        }
    }

    /// Parameter binding check: like [`Value::conforms_to`] but an integer
    /// literal is accepted for a `real64` parameter and widened.
    pub fn coerce_scalar(&self, ty: &DataType) -> Option<Value> {
        match (self, ty) {
            (Value::Integer(i), DataType::Real64) => Some(Value::Real(*i as f64)),
            (v, ty) if ty.is_scalar() && v.conforms_to(ty).is_ok() => Some(v.clone()),
            _ => None,
        }
    }

    pub(crate) fn scalar_to_json(&self) -> serde_json::Value {
        match self {
            Value::Integer(i) => serde_json::Value::from(*i),
            Value::Real(x) => serde_json::Number::from_f64(*x)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Boolean(b) => serde_json::Value::Bool(*b),
            Value::Text(s) => serde_json::Value::String(s.to_string()),
            other => unreachable!("non-scalar {} in a scalar slot", other.kind_name()),
        }
    }

    pub(crate) fn scalar_from_json(v: &serde_json::Value) -> Result<Value, String> {
        match v {
            serde_json::Value::Bool(b) => Ok(Value::Boolean(*b)),
            serde_json::Value::String(s) => Ok(Value::text(s)),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    return Ok(Value::Integer(i));
                }
                if n.is_u64() {
                    return Err(format!("integer {n} out of range"));
                }
                n.as_f64()
                    .map(Value::Real)
                    .ok_or_else(|| format!("number {n} out of range"))
            }
            other => Err(format!("expected a scalar literal, found {other}")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(i) => write!(f, "{i}"),
            Value::Real(x) => write!(f, "{x:?}"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Array(a) => write!(f, "array{:?}[{} elements]", a.shape(), a.data.len()),
            Value::Composite(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
            Value::Opaque(b) => write!(f, "opaque[{} bytes]", b.len()),
        }
    }
}

/// serde adapters for scalar literals (param defaults and bindings).
pub(crate) mod scalar_serde {
    use super::Value;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Value>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&v.scalar_to_json()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
        let raw = Option::<serde_json::Value>::deserialize(d)?;
        raw.map(|v| Value::scalar_from_json(&v).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub(crate) mod scalar_map_serde {
    use std::collections::BTreeMap;

    use super::Value;
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, Value>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(map.len()))?;
        for (k, v) in map {
            out.serialize_entry(k, &v.scalar_to_json())?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Value>, D::Error> {
        let raw: BTreeMap<String, serde_json::Value> = crate::model::json::unique_map(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                Value::scalar_from_json(&v)
                    .map(|v| (k, v))
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}
