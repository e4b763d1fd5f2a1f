//! Wire encoding of values for the subprocess and plugin protocols.
//!
//! - integer64: JSON integer; real64: JSON number, with the strings
//!   `"NaN"`, `"Infinity"` and `"-Infinity"` for non-finite values
//! - boolean, text: JSON literals
//! - array: `{"shape":[..],"data":[..]}` with row-major flat data
//! - composite: JSON object keyed by field name
//! - opaque: base64 string of the bytes
//!
//! Encoding is canonical (sorted composite keys, shortest round-trip
//! floats) and decoding checks the payload against the expected type.

use std::collections::BTreeMap;
use std::sync::Arc;

use base64::Engine as _;
use serde_json::{Map, Number, Value as Json};
use thiserror::Error;

use crate::model::{ArrayData, ArrayValue, DataType, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{reason}", if path.is_empty() { String::new() } else { format!("at {path}: ") })]
pub struct CodecError {
    pub path: String,
    pub reason: String,
}

fn err<T>(path: &str, reason: impl Into<String>) -> Result<T, CodecError> {
    Err(CodecError {
        path: path.to_string(),
        reason: reason.into(),
    })
}

pub fn encode_value(value: &Value) -> String {
    value_to_json(value).to_string()
}

pub fn decode_value(text: &str, expected: &DataType) -> Result<Value, CodecError> {
    let json: Json = serde_json::from_str(text).or_else(|e| err("", format!("malformed: {e}")))?;
    value_from_json(&json, expected)
}

fn real_to_json(x: f64) -> Json {
    match Number::from_f64(x) {
        Some(n) => Json::Number(n),
        None if x.is_nan() => Json::String("NaN".into()),
        None if x > 0.0 => Json::String("Infinity".into()),
        None => Json::String("-Infinity".into()),
    }
}

pub fn value_to_json(value: &Value) -> Json {
    match value {
        Value::Integer(i) => Json::from(*i),
        Value::Real(x) => real_to_json(*x),
        Value::Boolean(b) => Json::Bool(*b),
        Value::Text(s) => Json::String(s.to_string()),
        Value::Opaque(bytes) => Json::String(base64::engine::general_purpose::STANDARD.encode(bytes)),
        Value::Composite(fields) => Json::Object(fields.iter().map(|(k, v)| (k.clone(), value_to_json(v))).collect()),
        Value::Array(array) => {
            let data: Vec<Json> = match array.data() {
                ArrayData::Integer(d) => d.iter().map(|i| Json::from(*i)).collect(),
                ArrayData::Real(d) => d.iter().map(|x| real_to_json(*x)).collect(),
                ArrayData::Boolean(d) => d.iter().map(|b| Json::Bool(*b)).collect(),
                ArrayData::Values(d) => d.iter().map(value_to_json).collect(),
            };
            let mut obj = Map::new();
            obj.insert("shape".into(), Json::from(array.shape().to_vec()));
            obj.insert("data".into(), Json::Array(data));
            Json::Object(obj)
        }
    }
}

fn real_from_json(json: &Json, path: &str) -> Result<f64, CodecError> {
    match json {
        Json::Number(n) => n.as_f64().map_or_else(|| err(path, "number out of range"), Ok),
        Json::String(s) => match s.as_str() {
            "NaN" => Ok(f64::NAN),
            "Infinity" => Ok(f64::INFINITY),
            "-Infinity" => Ok(f64::NEG_INFINITY),
            _ => err(path, format!("expected real64, found string {s:?}")),
        },
        other => err(path, format!("expected real64, found {}", json_kind(other))),
    }
}

fn integer_from_json(json: &Json, path: &str) -> Result<i64, CodecError> {
    json.as_i64().map_or_else(
        || err(path, format!("expected integer64, found {}", json_kind(json))),
        Ok,
    )
}

fn json_kind(json: &Json) -> &'static str {
    match json {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(n) if n.is_f64() => "real number",
        Json::Number(_) => "integer",
        Json::String(_) => "string",
        Json::Array(_) => "list",
        Json::Object(_) => "object",
    }
}

pub fn value_from_json(json: &Json, expected: &DataType) -> Result<Value, CodecError> {
    decode_at(json, expected, "")
}

fn child(path: &str, seg: &str) -> String {
    if path.is_empty() {
        seg.to_string()
    } else {
        format!("{path}.{seg}")
    }
}

fn decode_at(json: &Json, ty: &DataType, path: &str) -> Result<Value, CodecError> {
    match ty {
        DataType::Integer64 => integer_from_json(json, path).map(Value::Integer),
        DataType::Real64 => real_from_json(json, path).map(Value::Real),
        DataType::Boolean => json
            .as_bool()
            .map(Value::Boolean)
            .map_or_else(|| err(path, format!("expected boolean, found {}", json_kind(json))), Ok),
        DataType::Text => json
            .as_str()
            .map(Value::text)
            .map_or_else(|| err(path, format!("expected text, found {}", json_kind(json))), Ok),
        DataType::Opaque { .. } => {
            let s = json
                .as_str()
                .map_or_else(|| err(path, "expected base64 string for opaque"), Ok)?;
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(s)
                .or_else(|e| err(path, format!("bad base64: {e}")))?;
            Ok(Value::Opaque(bytes.into()))
        }
        DataType::Composite { fields } => {
            let obj = json
                .as_object()
                .map_or_else(|| err(path, format!("expected object, found {}", json_kind(json))), Ok)?;
            if let Some(extra) = obj.keys().find(|k| !fields.contains_key(*k)) {
                return err(path, format!("unexpected field {extra}"));
            }
            let mut out = BTreeMap::new();
            for (name, fty) in fields {
                let fp = child(path, name);
                let v = obj.get(name).map_or_else(|| err(&fp, "missing field"), Ok)?;
                out.insert(name.clone(), decode_at(v, fty, &fp)?);
            }
            Ok(Value::Composite(Arc::new(out)))
        }
        DataType::Array { element, rank, extents } => {
            let obj = json
                .as_object()
                .map_or_else(|| err(path, "expected {\"shape\",\"data\"} object for array"), Ok)?;
            if obj.len() != 2 || !obj.contains_key("shape") || !obj.contains_key("data") {
                return err(path, "array object must have exactly the keys shape and data");
            }
            let shape: Vec<usize> = obj["shape"]
                .as_array()
                .and_then(|s| s.iter().map(|d| d.as_u64().map(|d| d as usize)).collect())
                .map_or_else(|| err(path, "shape must be a list of non-negative integers"), Ok)?;
            if shape.len() != *rank as usize {
                return err(path, format!("shape has rank {}, expected {rank}", shape.len()));
            }
            if let Some(extents) = extents {
                for (dim, (have, want)) in shape.iter().zip(extents).enumerate() {
                    if want.is_some_and(|w| w != *have as u64) {
                        return err(path, format!("extent mismatch in dimension {dim}"));
                    }
                }
            }
            let data = obj["data"]
                .as_array()
                .map_or_else(|| err(path, "data must be a list"), Ok)?;
            let expected: usize = shape.iter().product();
            if expected != data.len() {
                return err(
                    path,
                    format!(
                        "shape mismatch: shape {shape:?} needs {expected} elements, data has {}",
                        data.len()
                    ),
                );
            }
            let at = |i: usize| child(path, &format!("[{i}]"));
            let storage = match element.as_ref() {
                DataType::Integer64 => ArrayData::Integer(
                    data.iter()
                        .enumerate()
                        .map(|(i, j)| integer_from_json(j, &at(i)))
                        .collect::<Result<Vec<_>, _>>()?
                        .into(),
                ),
                DataType::Real64 => ArrayData::Real(
                    data.iter()
                        .enumerate()
                        .map(|(i, j)| real_from_json(j, &at(i)))
                        .collect::<Result<Vec<_>, _>>()?
                        .into(),
                ),
                DataType::Boolean => ArrayData::Boolean(
                    data.iter()
                        .enumerate()
                        .map(|(i, j)| j.as_bool().map_or_else(|| err(&at(i), "expected boolean"), Ok))
                        .collect::<Result<Vec<_>, _>>()?
                        .into(),
                ),
                other => ArrayData::Values(
                    data.iter()
                        .enumerate()
                        .map(|(i, j)| decode_at(j, other, &at(i)))
                        .collect::<Result<Vec<_>, _>>()?
                        .into(),
                ),
            };
            ArrayValue::new(shape, storage)
                .map(Value::Array)
                .or_else(|e| err(path, e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn real_scalar() {
        assert_eq!(encode_value(&Value::Real(3.5)), "3.5");
        assert_eq!(decode_value("3.5", &DataType::Real64).unwrap(), Value::Real(3.5));
        assert_eq!(decode_value("3", &DataType::Real64).unwrap(), Value::Real(3.0));
        assert_eq!(encode_value(&Value::Real(4.0)), "4.0");
    }

    #[test]
    fn non_finite_reals() {
        assert_eq!(encode_value(&Value::Real(f64::INFINITY)), "\"Infinity\"");
        let nan = decode_value("\"NaN\"", &DataType::Real64).unwrap();
        assert!(nan.as_real().unwrap().is_nan());
    }

    #[test]
    fn array_round_trip() {
        let ty = DataType::array(DataType::Real64, 2);
        let v = Value::Array(ArrayValue::new(vec![2, 2], ArrayData::Real(vec![1.0, 2.0, 3.0, 4.0].into())).unwrap());
        let text = encode_value(&v);
        assert_eq!(text, r#"{"shape":[2,2],"data":[1.0,2.0,3.0,4.0]}"#);
        assert_eq!(decode_value(&text, &ty).unwrap(), v);
        let swapped = r#"{"data":[1,2,3,4],"shape":[2,2]}"#;
        assert_eq!(decode_value(swapped, &ty).unwrap(), v);
    }

    #[test]
    fn shape_mismatch() {
        let ty = DataType::array(DataType::Real64, 2);
        let e = decode_value(r#"{"shape":[2,2],"data":[1,2,3]}"#, &ty).unwrap_err();
        assert!(e.reason.starts_with("shape mismatch"), "{e}");
    }

    #[test]
    fn type_errors() {
        assert!(decode_value("2.5", &DataType::Integer64).is_err());
        assert!(decode_value("\"x\"", &DataType::Boolean).is_err());
        assert!(decode_value("{", &DataType::Boolean)
            .unwrap_err()
            .reason
            .starts_with("malformed"));
        let c = DataType::composite([("x", DataType::Real64)]);
        assert!(decode_value(r#"{"x":1.0,"y":2.0}"#, &c).is_err());
        let e = decode_value(r#"{"x":true}"#, &c).unwrap_err();
        assert_eq!(e.path, "x");
    }

    fn value_and_type() -> impl Strategy<Value = (Value, DataType)> {
        let leaf = prop_oneof![
            any::<i64>().prop_map(|i| (Value::Integer(i), DataType::Integer64)),
            any::<f64>()
                .prop_filter("NaN breaks equality", |x| !x.is_nan())
                .prop_map(|x| (Value::Real(x), DataType::Real64)),
            any::<bool>().prop_map(|b| (Value::Boolean(b), DataType::Boolean)),
            ".{0,8}".prop_map(|s| (Value::text(s), DataType::Text)),
            proptest::collection::vec(any::<u8>(), 0..8).prop_map(|b| (
                Value::Opaque(b.into()),
                DataType::Opaque {
                    name: "org.t.blob".parse().unwrap(),
                    version: Default::default()
                }
            )),
            proptest::collection::vec(-1e6f64..1e6, 1..12).prop_map(|d| {
                let n = d.len();
                (
                    Value::Array(ArrayValue::new(vec![n], ArrayData::Real(d.into())).unwrap()),
                    DataType::array(DataType::Real64, 1),
                )
            }),
        ];
        leaf.prop_recursive(3, 16, 3, |inner| {
            proptest::collection::btree_map("[a-c]", inner, 1..3).prop_map(|m| {
                let ty = DataType::Composite {
                    fields: m.iter().map(|(k, (_, t))| (k.clone(), t.clone())).collect(),
                };
                let v = Value::Composite(Arc::new(m.into_iter().map(|(k, (v, _))| (k, v)).collect()));
                (v, ty)
            })
        })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode((v, ty) in value_and_type()) {
            let text = encode_value(&v);
            prop_assert_eq!(decode_value(&text, &ty).unwrap(), v.clone());
            prop_assert_eq!(encode_value(&decode_value(&text, &ty).unwrap()), text);
        }
    }
}
