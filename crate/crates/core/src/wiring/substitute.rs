//! Can a candidate component take a node's place without touching edges?

use std::fmt;

use serde::{Deserialize, Serialize};

use super::validate::resolve_node;
use super::{ports_compatible, Resolver, Violation, ViolationCode};
use crate::model::{ComponentDescriptor, Direction, PortRef, Project};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PortStatus {
    Ok,
    Missing,
    WrongDirection,
    /// `peer` is the other end of the offending edge.
    Incompatible {
        peer: String,
        reason: String,
    },
    /// A required candidate input that nothing feeds.
    Unbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortCheck {
    pub port: String,
    pub direction: Direction,
    #[serde(flatten)]
    pub status: PortStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub param: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionReport {
    pub node: String,
    pub candidate: String,
    pub ok: bool,
    pub ports: Vec<PortCheck>,
    pub params: Vec<ParamCheck>,
    /// Set when the node itself could not be examined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<Violation>,
}

impl fmt::Display for SubstitutionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "{} can replace node {}", self.candidate, self.node);
        }
        write!(f, "{} cannot replace node {}", self.candidate, self.node)?;
        if let Some(e) = &self.error {
            write!(f, ": {e}")?;
        }
        for p in &self.ports {
            match &p.status {
                PortStatus::Ok => {}
                PortStatus::Missing => write!(f, "; {} port `{}` missing", p.direction, p.port)?,
                PortStatus::WrongDirection => write!(f, "; port `{}` is not a {} port", p.port, p.direction)?,
                PortStatus::Incompatible { peer, reason } => {
                    write!(f, "; port `{}` incompatible with {peer}: {reason}", p.port)?
                }
                PortStatus::Unbound => write!(f, "; required port `{}` would be unbound", p.port)?,
            }
        }
        for p in self.params.iter().filter(|p| !p.ok) {
            write!(f, "; param `{}`: {}", p.param, p.detail)?;
        }
        Ok(())
    }
}

impl std::error::Error for SubstitutionReport {}

/// Checks the candidate against the node's connected ports and bound
/// params only. Connected ports are matched by name: each incoming edge's
/// source type must be compatible with the candidate's uses port and the
/// candidate's provides port must satisfy every consumer. Bound params
/// need an identically typed candidate param. So that the project stays
/// runnable, required candidate inputs must be connected and
/// default-less candidate params must be bound.
pub fn substitutable(
    project: &Project,
    node: &str,
    candidate: &ComponentDescriptor,
    resolver: &dyn Resolver,
) -> SubstitutionReport {
    let mut report = SubstitutionReport {
        node: node.to_string(),
        candidate: candidate.id(),
        ok: false,
        ports: Vec::new(),
        params: Vec::new(),
        error: None,
    };
    let Some(spec) = project.nodes.get(node) else {
        report.error = Some(Violation::new(
            ViolationCode::DanglingRef,
            format!("nodes.{node}"),
            "no such node",
        ));
        return report;
    };
    let current = resolve_node(resolver, node, spec).ok();

    let mut checked_uses = Vec::new();
    for edge in project.edges.iter().filter(|e| e.dst.node == node) {
        let port = &edge.dst.port;
        checked_uses.push(port.as_str());
        let status = match candidate.port(port) {
            None => PortStatus::Missing,
            Some(p) if p.direction != Direction::Uses => PortStatus::WrongDirection,
            Some(p) => match peer_type(project, resolver, &edge.src, Direction::Provides) {
                Err(reason) => PortStatus::Incompatible {
                    peer: edge.src.to_string(),
                    reason,
                },
                Ok(source) => match ports_compatible(&source, &p.datatype) {
                    Ok(()) => PortStatus::Ok,
                    Err(m) => PortStatus::Incompatible {
                        peer: edge.src.to_string(),
                        reason: m.to_string(),
                    },
                },
            },
        };
        report.ports.push(PortCheck {
            port: port.clone(),
            direction: Direction::Uses,
            status,
        });
    }

    let mut outputs: Vec<&str> = project
        .edges
        .iter()
        .filter(|e| e.src.node == node)
        .map(|e| e.src.port.as_str())
        .collect();
    outputs.sort_unstable();
    outputs.dedup();
    for port in outputs {
        let status = match candidate.port(port) {
            None => PortStatus::Missing,
            Some(p) if p.direction != Direction::Provides => PortStatus::WrongDirection,
            Some(p) => project
                .edges
                .iter()
                .filter(|e| e.src.node == node && e.src.port == port)
                .find_map(|e| {
                    let reason = match peer_type(project, resolver, &e.dst, Direction::Uses) {
                        Err(reason) => reason,
                        Ok(used) => ports_compatible(&p.datatype, &used).err()?.to_string(),
                    };
                    Some(PortStatus::Incompatible {
                        peer: e.dst.to_string(),
                        reason,
                    })
                })
                .unwrap_or(PortStatus::Ok),
        };
        report.ports.push(PortCheck {
            port: port.to_string(),
            direction: Direction::Provides,
            status,
        });
    }

    for p in candidate.uses_ports().filter(|p| p.required) {
        if !checked_uses.contains(&p.name.as_str()) {
            report.ports.push(PortCheck {
                port: p.name.clone(),
                direction: Direction::Uses,
                status: PortStatus::Unbound,
            });
        }
    }

    for (name, value) in &spec.params {
        let existing = current.as_ref().and_then(|d| d.param(name));
        let check = match (candidate.param(name), existing) {
            (None, _) => ParamCheck {
                param: name.clone(),
                ok: false,
                detail: "missing in candidate".into(),
            },
            (Some(c), Some(old)) if c.datatype != old.datatype => ParamCheck {
                param: name.clone(),
                ok: false,
                detail: format!("type {} differs from {}", c.datatype, old.datatype),
            },
            (Some(c), _) if value.coerce_scalar(&c.datatype).is_none() => ParamCheck {
                param: name.clone(),
                ok: false,
                detail: format!("bound {} does not fit {}", value.kind_name(), c.datatype),
            },
            (Some(_), _) => ParamCheck {
                param: name.clone(),
                ok: true,
                detail: String::new(),
            },
        };
        report.params.push(check);
    }
    for c in &candidate.params {
        if c.default.is_none() && !spec.params.contains_key(&c.name) {
            report.params.push(ParamCheck {
                param: c.name.clone(),
                ok: false,
                detail: "candidate requires a binding".into(),
            });
        }
    }

    report.ok = report.ports.iter().all(|p| p.status == PortStatus::Ok) && report.params.iter().all(|p| p.ok);
    report
}

fn peer_type(
    project: &Project,
    resolver: &dyn Resolver,
    peer: &PortRef,
    direction: Direction,
) -> Result<crate::model::DataType, String> {
    super::validate::endpoint(project, resolver, peer, direction, "").map_err(|v| v.detail)
}

/// Swaps the node's component when the candidate is substitutable; edges
/// and param bindings are kept as they are.
#[allow(clippy::result_large_err)] // the refusal is the report itself
pub fn replace_node(
    project: &Project,
    node: &str,
    candidate: &ComponentDescriptor,
    resolver: &dyn Resolver,
) -> Result<Project, SubstitutionReport> {
    let report = substitutable(project, node, candidate, resolver);
    if !report.ok {
        return Err(report);
    }
    let mut next = project.clone();
    let spec = next.nodes.get_mut(node).expect("checked by substitutable");
    spec.component = candidate.name.clone();
    spec.version = candidate.version;
    Ok(next)
}
