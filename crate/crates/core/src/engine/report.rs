use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::codec::value_to_json;
use crate::model::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Ok,
    Error,
    /// Not run because something upstream failed.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeError {
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeReport {
    pub node: String,
    pub status: NodeStatus,
    /// Wall clock, nanoseconds since the Unix epoch.
    pub start_ns: u64,
    pub stop_ns: u64,
    #[serde(serialize_with = "encoded_values")]
    pub outputs: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<NodeError>,
}

fn encoded_values<S: Serializer>(values: &BTreeMap<String, Value>, s: S) -> Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(values.len()))?;
    for (k, v) in values {
        map.serialize_entry(k, &value_to_json(v))?;
    }
    map.end()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub wall_ns: u64,
    pub node_count: usize,
    pub ok: usize,
    pub failed: usize,
    pub skipped: usize,
}

/// Per-node record of one project execution, in schedule order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// SHA-256 of the canonical project document.
    pub project_hash: String,
    pub nodes: Vec<NodeReport>,
    pub totals: Totals,
}

impl RunReport {
    pub fn node(&self, id: &str) -> Option<&NodeReport> {
        self.nodes.iter().find(|n| n.node == id)
    }

    pub fn output(&self, node: &str, port: &str) -> Option<&Value> {
        self.node(node)?.outputs.get(port)
    }

    pub fn succeeded(&self) -> bool {
        self.totals.failed == 0 && self.totals.skipped == 0
    }

    pub fn to_json(&self) -> String {
        crate::model::json::to_canonical(self)
    }
}
