//! Component descriptors: the published contract of a component.
//!
//! The document form is strict JSON (`*.comodi.json`). Keys are emitted in
//! the order the fields are declared below, maps are sorted, and the output
//! is pretty-printed one key per line, so equal descriptors serialize to
//! identical bytes and a change to one field touches only that field's line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::names::{is_identifier, GlobalName, Version};
use super::project::{is_node_id, PortRef, Project};
use super::types::DataType;
use super::value::{scalar_serde, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uses,
    Provides,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Uses => "uses",
            Direction::Provides => "provides",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Elementary,
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Builtin,
    Subprocess,
    Plugin,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Builtin => "builtin",
            Backend::Subprocess => "subprocess",
            Backend::Plugin => "plugin",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSpec {
    pub name: String,
    pub direction: Direction,
    pub datatype: DataType,
    /// Only meaningful for uses ports; provides ports are always produced.
    pub required: bool,
    #[serde(default)]
    pub doc: String,
}

impl PortSpec {
    pub fn uses(name: impl Into<String>, datatype: DataType) -> Self {
        PortSpec {
            name: name.into(),
            direction: Direction::Uses,
            datatype,
            required: true,
            doc: String::new(),
        }
    }

    pub fn provides(name: impl Into<String>, datatype: DataType) -> Self {
        PortSpec {
            name: name.into(),
            direction: Direction::Provides,
            datatype,
            required: true,
            doc: String::new(),
        }
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub datatype: DataType,
    #[serde(default, with = "scalar_serde", skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default)]
    pub doc: String,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, datatype: DataType, default: Option<Value>) -> Self {
        ParamSpec {
            name: name.into(),
            datatype,
            default,
            doc: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocInfo {
    pub summary: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub authors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Behavior {
    pub deterministic: bool,
    pub stateful: bool,
}

impl Default for Behavior {
    fn default() -> Self {
        Behavior {
            deterministic: true,
            stateful: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Representation {
    pub label: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Implementation {
    pub backend: Backend,
    /// Where the artifact lives: `builtin:`, a path relative to the
    /// descriptor, `file:<path>`, or a public URL.
    pub artifact: String,
    /// Builtin key, subprocess command (`{artifact}` expands to the
    /// resolved path) or plugin symbol.
    pub entry: String,
    pub platforms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Composition {
    pub project: Project,
    /// Inner `node.port` to outer port name.
    #[serde(deserialize_with = "unique_promotions")]
    pub promotions: BTreeMap<PortRef, String>,
}

fn unique_promotions<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<PortRef, String>, D::Error> {
    let raw: BTreeMap<String, String> = super::json::unique_map(d)?;
    raw.into_iter()
        .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(serde::de::Error::custom))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDescriptor {
    pub name: GlobalName,
    pub version: Version,
    pub kind: ComponentKind,
    pub doc: DocInfo,
    pub tags: Vec<String>,
    pub ports: Vec<PortSpec>,
    pub params: Vec<ParamSpec>,
    pub behavior: Behavior,
    pub representation: Representation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<Implementation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Composition>,
}

impl ComponentDescriptor {
    pub fn port(&self, name: &str) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn uses_ports(&self) -> impl Iterator<Item = &PortSpec> {
        self.ports.iter().filter(|p| p.direction == Direction::Uses)
    }

    pub fn provides_ports(&self) -> impl Iterator<Item = &PortSpec> {
        self.ports.iter().filter(|p| p.direction == Direction::Provides)
    }

    /// `name@version`
    pub fn id(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }

    /// Starts an elementary descriptor backed by a builtin entry of the same
    /// leaf name; adjust with the builder methods below.
    pub fn elementary(name: GlobalName, version: Version) -> Self {
        let leaf = name.leaf().to_string();
        ComponentDescriptor {
            doc: DocInfo {
                summary: leaf.clone(),
                ..Default::default()
            },
            representation: Representation {
                label: leaf.clone(),
                category: "general".into(),
            },
            name,
            version,
            kind: ComponentKind::Elementary,
            tags: vec!["general".into()],
            ports: Vec::new(),
            params: Vec::new(),
            behavior: Behavior::default(),
            implementation: Some(Implementation {
                backend: Backend::Builtin,
                artifact: "builtin:".into(),
                entry: leaf,
                platforms: vec!["any".into()],
            }),
            composition: None,
        }
    }

    pub fn with_port(mut self, port: PortSpec) -> Self {
        self.ports.push(port);
        self
    }

    pub fn with_param(mut self, param: ParamSpec) -> Self {
        self.params.push(param);
        self
    }

    pub fn with_tags<I: IntoIterator<Item = S>, S: Into<String>>(mut self, tags: I) -> Self {
        self.tags = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Self {
        self.doc.summary = summary.into();
        self
    }

    pub fn with_implementation(mut self, implementation: Implementation) -> Self {
        self.implementation = Some(implementation);
        self
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = behavior;
        self
    }
}

/// A broken descriptor invariant; `path` locates the offending element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptorViolation {
    pub invariant: Invariant,
    pub path: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Invariant {
    DuplicatePort,
    DuplicateParam,
    BadIdentifier,
    BadDatatype,
    ParamNotScalar,
    ParamDefaultType,
    KindBodyMismatch,
    PromotionTargetAbsent,
    PromotedPortMissing,
    PortNotPromoted,
    DuplicatePromotion,
    TagsEmpty,
    BadTag,
    EmptyImplementationField,
}

impl Invariant {
    pub fn message(self) -> &'static str {
        match self {
            Invariant::DuplicatePort => "duplicate port name",
            Invariant::DuplicateParam => "duplicate param name",
            Invariant::BadIdentifier => "invalid identifier",
            Invariant::BadDatatype => "invalid datatype",
            Invariant::ParamNotScalar => "param type not scalar",
            Invariant::ParamDefaultType => "param default type mismatch",
            Invariant::KindBodyMismatch => "kind/body mismatch",
            Invariant::PromotionTargetAbsent => "promotion target absent",
            Invariant::PromotedPortMissing => "promoted port missing",
            Invariant::PortNotPromoted => "outer port not promoted",
            Invariant::DuplicatePromotion => "duplicate promotion",
            Invariant::TagsEmpty => "tags empty",
            Invariant::BadTag => "invalid tag",
            Invariant::EmptyImplementationField => "empty implementation field",
        }
    }
}

impl fmt::Display for DescriptorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.invariant.message())?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("syntax error at line {line} column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown field at line {line} column {column}: {message}")]
    UnknownField {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed descriptor at line {line} column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid descriptor: {}", join(.0))]
    Invalid(Vec<DescriptorViolation>),
}

fn join(violations: &[DescriptorViolation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<serde_json::Error> for DescriptorError {
    fn from(err: serde_json::Error) -> Self {
        let (line, column) = (err.line(), err.column());
        let full = err.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        match err.classify() {
            serde_json::error::Category::Syntax | serde_json::error::Category::Eof => {
                DescriptorError::Syntax { line, column, message }
            }
            _ if message.starts_with("unknown field") => DescriptorError::UnknownField { line, column, message },
            _ => DescriptorError::Malformed { line, column, message },
        }
    }
}

/// Parses a descriptor document and checks every invariant.
pub fn parse_descriptor(text: &str) -> Result<ComponentDescriptor, DescriptorError> {
    let descriptor: ComponentDescriptor = serde_json::from_str(text)?;
    let violations = validate_descriptor(&descriptor);
    if violations.is_empty() {
        Ok(descriptor)
    } else {
        Err(DescriptorError::Invalid(violations))
    }
}

pub fn serialize_descriptor(d: &ComponentDescriptor) -> String {
    super::json::to_canonical(d)
}

fn violation(invariant: Invariant, path: impl Into<String>, detail: impl Into<String>) -> DescriptorViolation {
    DescriptorViolation {
        invariant,
        path: path.into(),
        detail: detail.into(),
    }
}

fn is_tag(tag: &str) -> bool {
    !tag.is_empty()
        && tag.split('/').all(|seg| {
            let mut chars = seg.chars();
            matches!(chars.next(), Some('a'..='z' | '0'..='9'))
                && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_' | '-'))
        })
}

/// Lists every broken invariant; empty means the descriptor is valid.
pub fn validate_descriptor(d: &ComponentDescriptor) -> Vec<DescriptorViolation> {
    let mut out = Vec::new();

    if d.tags.is_empty() {
        out.push(violation(Invariant::TagsEmpty, "tags", ""));
    }
    for (i, tag) in d.tags.iter().enumerate() {
        if !is_tag(tag) {
            out.push(violation(Invariant::BadTag, format!("tags[{i}]"), tag.clone()));
        }
    }

    let mut seen = BTreeSet::new();
    for (i, port) in d.ports.iter().enumerate() {
        let path = format!("ports[{i}]");
        if !is_identifier(&port.name) {
            out.push(violation(Invariant::BadIdentifier, &path, port.name.clone()));
        }
        if !seen.insert(port.name.as_str()) {
            out.push(violation(Invariant::DuplicatePort, &path, port.name.clone()));
        }
        if let Err(e) = port.datatype.check() {
            out.push(violation(
                Invariant::BadDatatype,
                format!("{path}.datatype"),
                e.to_string(),
            ));
        }
    }

    let mut seen = BTreeSet::new();
    for (i, param) in d.params.iter().enumerate() {
        let path = format!("params[{i}]");
        if !is_identifier(&param.name) {
            out.push(violation(Invariant::BadIdentifier, &path, param.name.clone()));
        }
        if !seen.insert(param.name.as_str()) {
            out.push(violation(Invariant::DuplicateParam, &path, param.name.clone()));
        }
        if !param.datatype.is_scalar() {
            out.push(violation(Invariant::ParamNotScalar, &path, param.name.clone()));
        } else if let Some(default) = &param.default {
            let finite = !matches!(default, Value::Real(x) if !x.is_finite());
            if default.coerce_scalar(&param.datatype).is_none() || !finite {
                out.push(violation(
                    Invariant::ParamDefaultType,
                    format!("{path}.default"),
                    param.name.clone(),
                ));
            }
        }
    }

    match (d.kind, &d.implementation, &d.composition) {
        (ComponentKind::Elementary, Some(imp), None) => {
            for (field, value) in [("artifact", imp.artifact.as_str()), ("entry", imp.entry.as_str())] {
                if value.is_empty() {
                    out.push(violation(
                        Invariant::EmptyImplementationField,
                        format!("implementation.{field}"),
                        field,
                    ));
                }
            }
            if imp.platforms.is_empty() {
                out.push(violation(
                    Invariant::EmptyImplementationField,
                    "implementation.platforms",
                    "platforms",
                ));
            }
        }
        (ComponentKind::Compound, None, Some(comp)) => check_composition(d, comp, &mut out),
        _ => out.push(violation(Invariant::KindBodyMismatch, "kind", "")),
    }
    out
}

fn check_composition(d: &ComponentDescriptor, comp: &Composition, out: &mut Vec<DescriptorViolation>) {
    let mut outer_names = BTreeSet::new();
    for (inner, outer) in &comp.promotions {
        let path = format!("composition.promotions.{inner}");
        if !comp.project.nodes.contains_key(&inner.node) || !is_node_id(&inner.node) {
            out.push(violation(Invariant::PromotionTargetAbsent, &path, inner.to_string()));
        }
        if !outer_names.insert(outer.as_str()) {
            out.push(violation(Invariant::DuplicatePromotion, &path, outer.clone()));
        }
        if d.port(outer).is_none() {
            out.push(violation(Invariant::PromotedPortMissing, &path, outer.clone()));
        }
    }
    for (i, port) in d.ports.iter().enumerate() {
        if !outer_names.contains(port.name.as_str()) {
            out.push(violation(
                Invariant::PortNotPromoted,
                format!("ports[{i}]"),
                port.name.clone(),
            ));
        }
    }
}
