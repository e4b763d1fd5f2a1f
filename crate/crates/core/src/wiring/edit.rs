//! Project edits. Each returns an updated copy and leaves the input
//! untouched, so a refused edit has no effect.

use super::validate::{check_params, cyclic_nodes, endpoint, resolve_node};
use super::{ports_compatible, Resolver, Violation, ViolationCode};
use crate::model::{is_node_id, Direction, Edge, NodeSpec, PortRef, Project};

/// Adds an instance of a resolvable component under a fresh id.
pub fn add_node(project: &Project, id: &str, node: NodeSpec, resolver: &dyn Resolver) -> Result<Project, Violation> {
    if !is_node_id(id) {
        return Err(Violation::new(
            ViolationCode::DanglingRef,
            format!("nodes.{id}"),
            "invalid instance id",
        ));
    }
    if project.nodes.contains_key(id) {
        return Err(Violation::new(
            ViolationCode::DuplicateBinding,
            format!("nodes.{id}"),
            "instance id already in use",
        ));
    }
    let descriptor = resolve_node(resolver, id, &node)?;
    let mut problems = Vec::new();
    // missing params may still be bound later; only bad bindings are refused
    check_params(id, &node, &descriptor, &mut problems);
    if let Some(v) = problems
        .into_iter()
        .find(|v| node.params.keys().any(|k| v.path.ends_with(&format!(".{k}"))))
    {
        return Err(v);
    }
    let mut next = project.clone();
    next.nodes.insert(id.to_string(), node);
    Ok(next)
}

/// Removes a node and every edge touching it.
pub fn remove_node(project: &Project, id: &str) -> Result<Project, Violation> {
    if !project.nodes.contains_key(id) {
        return Err(Violation::new(
            ViolationCode::DanglingRef,
            format!("nodes.{id}"),
            format!("no node `{id}`"),
        ));
    }
    let mut next = project.clone();
    next.nodes.remove(id);
    next.edges.retain(|e| e.src.node != id && e.dst.node != id);
    Ok(next)
}

/// Connects a provides port to a uses port after checking references,
/// the single-producer rule, type compatibility and acyclicity.
pub fn connect(project: &Project, src: &PortRef, dst: &PortRef, resolver: &dyn Resolver) -> Result<Project, Violation> {
    let path = format!("{src} -> {dst}");
    let provided = endpoint(project, resolver, src, Direction::Provides, &path)?;
    let used = endpoint(project, resolver, dst, Direction::Uses, &path)?;
    if let Some(existing) = project.edge_into(dst) {
        return Err(Violation::new(
            ViolationCode::DuplicateBinding,
            dst.to_string(),
            format!("already bound by {}", existing.src),
        ));
    }
    ports_compatible(&provided, &used)
        .map_err(|m| Violation::new(ViolationCode::TypeMismatch, &path, m.to_string()))?;

    let mut next = project.clone();
    next.edges.push(Edge::new(src.clone(), dst.clone()));
    let graph: Vec<(&str, &str)> = next
        .edges
        .iter()
        .map(|e| (e.src.node.as_str(), e.dst.node.as_str()))
        .collect();
    let cyclic = cyclic_nodes(next.nodes.keys().map(String::as_str), &graph);
    if !cyclic.is_empty() {
        return Err(Violation::new(
            ViolationCode::Cycle,
            &path,
            format!("edge would close a cycle through {}", cyclic.join(", ")),
        ));
    }
    Ok(next)
}

pub fn disconnect(project: &Project, dst: &PortRef) -> Result<Project, Violation> {
    if project.edge_into(dst).is_none() {
        return Err(Violation::new(
            ViolationCode::DanglingRef,
            dst.to_string(),
            "no edge into this port",
        ));
    }
    let mut next = project.clone();
    next.edges.retain(|e| &e.dst != dst);
    Ok(next)
}
