//! The project document: component instances and port-to-port edges.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::names::{is_identifier, GlobalName, Version};
use super::value::{scalar_map_serde, Value};

/// `node.port` reference; node ids may contain `/` (namespaced instances),
/// ports never contain `.`, so the last dot separates the two.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub node: String,
    pub port: String,
}

impl PortRef {
    pub fn new(node: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef {
            node: node.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

impl FromStr for PortRef {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (node, port) = s
            .rsplit_once('.')
            .ok_or_else(|| format!("`{s}` is not of the form node.port"))?;
        if !is_node_id(node) || !is_identifier(port) {
            return Err(format!("`{s}` is not of the form node.port"));
        }
        Ok(PortRef::new(node, port))
    }
}

impl Serialize for PortRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PortRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Instance ids: identifiers, optionally namespaced with `/`.
pub fn is_node_id(s: &str) -> bool {
    !s.is_empty() && s.split('/').all(is_identifier)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectMeta {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub component: GlobalName,
    pub version: Version,
    #[serde(default, with = "scalar_map_serde")]
    pub params: BTreeMap<String, Value>,
}

impl NodeSpec {
    pub fn new(component: GlobalName, version: Version) -> Self {
        NodeSpec {
            component,
            version,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: Value) -> Self {
        self.params.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: PortRef,
    pub dst: PortRef,
}

impl Edge {
    pub fn new(src: PortRef, dst: PortRef) -> Self {
        Edge { src, dst }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    #[serde(default)]
    pub meta: ProjectMeta,
    #[serde(deserialize_with = "unique_nodes")]
    pub nodes: BTreeMap<String, NodeSpec>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

fn unique_nodes<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, NodeSpec>, D::Error> {
    let nodes: BTreeMap<String, NodeSpec> = super::json::unique_map(d)?;
    if let Some(bad) = nodes.keys().find(|id| !is_node_id(id)) {
        return Err(serde::de::Error::custom(format!("invalid node id `{bad}`")));
    }
    Ok(nodes)
}

impl Project {
    pub fn new(title: impl Into<String>) -> Self {
        Project {
            meta: ProjectMeta {
                title: title.into(),
                description: String::new(),
            },
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Canonical text: fixed key order, nodes sorted by id.
    pub fn to_json(&self) -> String {
        super::json::to_canonical(self)
    }

    pub fn with_node(mut self, id: impl Into<String>, node: NodeSpec) -> Self {
        self.nodes.insert(id.into(), node);
        self
    }

    pub fn with_edge(mut self, src: &str, dst: &str) -> Self {
        self.edges.push(Edge::new(
            src.parse().expect("valid port ref"),
            dst.parse().expect("valid port ref"),
        ));
        self
    }

    /// Edge terminating at `dst`, if any.
    pub fn edge_into(&self, dst: &PortRef) -> Option<&Edge> {
        self.edges.iter().find(|e| &e.dst == dst)
    }
}
