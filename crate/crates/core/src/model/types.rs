//! The structural port type system.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use super::names::{is_identifier, GlobalName, Version};

pub const MAX_RANK: u32 = 7;
pub const MAX_DEPTH: usize = 16;

/// Structural semantic type of a port or parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataType {
    Integer64,
    Real64,
    Boolean,
    Text,
    Array {
        element: Box<DataType>,
        rank: u32,
        /// One entry per dimension; `None` entries are unspecified.
        extents: Option<Vec<Option<u64>>>,
    },
    Composite {
        fields: BTreeMap<String, DataType>,
    },
    Opaque {
        name: GlobalName,
        version: Version,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("array rank {0} outside 1..=7")]
    Rank(u32),
    #[error("array has {extents} extents for rank {rank}")]
    ExtentCount { rank: u32, extents: usize },
    #[error("array extent must be positive")]
    ZeroExtent,
    #[error("composite type needs at least one field")]
    EmptyComposite,
    #[error("invalid field name `{0}`")]
    FieldName(String),
    #[error("type nesting depth {0} exceeds 16")]
    Depth(usize),
}

impl DataType {
    pub fn array(element: DataType, rank: u32) -> Self {
        DataType::Array {
            element: Box::new(element),
            rank,
            extents: None,
        }
    }

    pub fn array_with_extents(element: DataType, extents: Vec<Option<u64>>) -> Self {
        DataType::Array {
            element: Box::new(element),
            rank: extents.len() as u32,
            extents: Some(extents),
        }
    }

    pub fn composite<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, DataType)>,
        S: Into<String>,
    {
        DataType::Composite {
            fields: fields.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DataType::Integer64 => "integer64",
            DataType::Real64 => "real64",
            DataType::Boolean => "boolean",
            DataType::Text => "text",
            DataType::Array { .. } => "array",
            DataType::Composite { .. } => "composite",
            DataType::Opaque { .. } => "opaque",
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            DataType::Integer64 | DataType::Real64 | DataType::Boolean | DataType::Text
        )
    }

    /// Scalars and opaques have depth 1; each array or composite level adds one.
    pub fn depth(&self) -> usize {
        match self {
            DataType::Array { element, .. } => 1 + element.depth(),
            DataType::Composite { fields } => 1 + fields.values().map(DataType::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// Checks the type invariants (rank, extents, non-empty composites, depth).
    pub fn check(&self) -> Result<(), TypeError> {
        let depth = self.depth();
        if depth > MAX_DEPTH {
            return Err(TypeError::Depth(depth));
        }
        self.check_shape()
    }

    fn check_shape(&self) -> Result<(), TypeError> {
        match self {
            DataType::Array { element, rank, extents } => {
                if *rank == 0 || *rank > MAX_RANK {
                    return Err(TypeError::Rank(*rank));
                }
                if let Some(extents) = extents {
                    if extents.len() != *rank as usize {
                        return Err(TypeError::ExtentCount {
                            rank: *rank,
                            extents: extents.len(),
                        });
                    }
                    if extents.contains(&Some(0)) {
                        return Err(TypeError::ZeroExtent);
                    }
                }
                element.check_shape()
            }
            DataType::Composite { fields } => {
                if fields.is_empty() {
                    return Err(TypeError::EmptyComposite);
                }
                for (name, ty) in fields {
                    if !is_identifier(name) {
                        return Err(TypeError::FieldName(name.clone()));
                    }
                    ty.check_shape()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Renders in the signature DSL syntax, extended with extents and opaques.
impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::Array { element, rank, extents } => {
                write!(f, "array<{element},{rank}")?;
                if let Some(extents) = extents {
                    f.write_str(",[")?;
                    for (i, e) in extents.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        match e {
                            Some(n) => write!(f, "{n}")?,
                            None => f.write_str("?")?,
                        }
                    }
                    f.write_str("]")?;
                }
                f.write_str(">")
            }
            DataType::Composite { fields } => {
                f.write_str("composite{")?;
                for (i, (name, ty)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{name}:{ty}")?;
                }
                f.write_str("}")
            }
            DataType::Opaque { name, version } => write!(f, "opaque<{name}@{version}>"),
            scalar => f.write_str(scalar.kind_name()),
        }
    }
}

impl Serialize for DataType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("kind", self.kind_name())?;
        match self {
            DataType::Array { element, rank, extents } => {
                map.serialize_entry("element", element)?;
                map.serialize_entry("rank", rank)?;
                if let Some(extents) = extents {
                    map.serialize_entry("extents", extents)?;
                }
            }
            DataType::Composite { fields } => map.serialize_entry("fields", fields)?,
            DataType::Opaque { name, version } => {
                map.serialize_entry("name", name)?;
                map.serialize_entry("version", version)?;
            }
            _ => {}
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(transparent)]
struct UniqueFields(#[serde(deserialize_with = "super::json::unique_map")] BTreeMap<String, DataType>);

impl<'de> Deserialize<'de> for DataType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TypeVisitor;

        impl<'de> Visitor<'de> for TypeVisitor {
            type Value = DataType;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a datatype object tagged with \"kind\"")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<DataType, A::Error> {
                // "kind" may appear anywhere, so the other entries are buffered raw
                let mut kind: Option<String> = None;
                let mut rest: Vec<(String, Box<RawValue>)> = Vec::new();
                while let Some(key) = map.next_key::<String>()? {
                    if key == "kind" {
                        if kind.is_some() {
                            return Err(de::Error::duplicate_field("kind"));
                        }
                        kind = Some(map.next_value()?);
                    } else {
                        if rest.iter().any(|(k, _)| *k == key) {
                            return Err(de::Error::custom(format!("duplicate field `{key}`")));
                        }
                        let raw: Box<RawValue> = map.next_value()?;
                        rest.push((key, raw));
                    }
                }
                let kind = kind.ok_or_else(|| de::Error::missing_field("kind"))?;
                let allowed: &[&'static str] = match kind.as_str() {
                    "integer64" | "real64" | "boolean" | "text" => &[],
                    "array" => &["element", "rank", "extents"],
                    "composite" => &["fields"],
                    "opaque" => &["name", "version"],
                    other => {
                        return Err(de::Error::unknown_variant(
                            other,
                            &["integer64", "real64", "boolean", "text", "array", "composite", "opaque"],
                        ))
                    }
                };
                for (key, _) in &rest {
                    if !allowed.contains(&key.as_str()) {
                        return Err(de::Error::unknown_field(key, allowed));
                    }
                }
                fn field<T: serde::de::DeserializeOwned, E: de::Error>(
                    rest: &[(String, Box<RawValue>)],
                    name: &'static str,
                ) -> Result<Option<T>, E> {
                    rest.iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, raw)| {
                            serde_json::from_str(raw.get())
                                .map_err(|e| E::custom(format!("in `{name}`: {}", strip_position(&e))))
                        })
                        .transpose()
                }
                fn required<T: serde::de::DeserializeOwned, E: de::Error>(
                    rest: &[(String, Box<RawValue>)],
                    name: &'static str,
                ) -> Result<T, E> {
                    field(rest, name)?.ok_or_else(|| E::missing_field(name))
                }
                Ok(match kind.as_str() {
                    "integer64" => DataType::Integer64,
                    "real64" => DataType::Real64,
                    "boolean" => DataType::Boolean,
                    "text" => DataType::Text,
                    "array" => DataType::Array {
                        element: Box::new(required(&rest, "element")?),
                        rank: required(&rest, "rank")?,
                        extents: field(&rest, "extents")?,
                    },
                    "composite" => {
                        let UniqueFields(fields) = required(&rest, "fields")?;
                        DataType::Composite { fields }
                    }
                    _ => DataType::Opaque {
                        name: required(&rest, "name")?,
                        version: required(&rest, "version")?,
                    },
                })
            }
        }

        deserializer.deserialize_map(TypeVisitor)
    }
}

/// serde_json appends "at line L column C" relative to the inner fragment,
/// which is meaningless once re-reported against the outer document.
fn strip_position(err: &serde_json::Error) -> String {
    let text = err.to_string();
    match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_tagged() {
        let t = DataType::array_with_extents(DataType::Real64, vec![Some(3), None]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"array","element":{"kind":"real64"},"rank":2,"extents":[3,null]}"#
        );
        let back: DataType = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn kind_may_come_last() {
        let t: DataType = serde_json::from_str(r#"{"fields":{"x":{"kind":"real64"}},"kind":"composite"}"#).unwrap();
        assert_eq!(t, DataType::composite([("x", DataType::Real64)]));
    }

    #[test]
    fn strictness() {
        for bad in [
            r#"{"kind":"real64","rank":1}"#,
            r#"{"kind":"float"}"#,
            r#"{"kind":"array","rank":1}"#,
            r#"{"kind":"composite","fields":{"x":{"kind":"real64"},"x":{"kind":"text"}}}"#,
        ] {
            assert!(serde_json::from_str::<DataType>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn invariants() {
        assert_eq!(DataType::array(DataType::Real64, 0).check(), Err(TypeError::Rank(0)));
        assert_eq!(DataType::array(DataType::Real64, 8).check(), Err(TypeError::Rank(8)));
        assert!(DataType::array(DataType::Real64, 7).check().is_ok());
        assert_eq!(
            DataType::Composite {
                fields: BTreeMap::new()
            }
            .check(),
            Err(TypeError::EmptyComposite)
        );
        let mut deep = DataType::Real64;
        for _ in 0..15 {
            deep = DataType::array(deep, 1);
        }
        assert_eq!(deep.depth(), 16);
        assert!(deep.check().is_ok());
        let deeper = DataType::array(deep, 1);
        assert_eq!(deeper.check(), Err(TypeError::Depth(17)));
    }

    #[test]
    fn display_uses_dsl_syntax() {
        let t = DataType::composite([("x", DataType::array(DataType::Integer64, 2)), ("y", DataType::Text)]);
        assert_eq!(t.to_string(), "composite{x:array<integer64,2>,y:text}");
    }
}
