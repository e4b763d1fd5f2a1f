use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{ports_compatible, Resolver, Violation, ViolationCode};
use crate::model::{ComponentDescriptor, DataType, Direction, NodeSpec, PortRef, Project};

/// Looks up the port an edge endpoint names, checking its direction.
pub(crate) fn endpoint(
    project: &Project,
    resolver: &dyn Resolver,
    port: &PortRef,
    direction: Direction,
    path: &str,
) -> Result<DataType, Violation> {
    let node = project
        .nodes
        .get(&port.node)
        .ok_or_else(|| Violation::new(ViolationCode::DanglingRef, path, format!("no node `{}`", port.node)))?;
    let descriptor = resolve_node(resolver, &port.node, node)?;
    match descriptor.port(&port.port) {
        Some(spec) if spec.direction == direction => Ok(spec.datatype.clone()),
        Some(spec) => Err(Violation::new(
            ViolationCode::DanglingRef,
            path,
            format!("`{port}` is a {} port, {direction} expected", spec.direction),
        )),
        None => Err(Violation::new(
            ViolationCode::DanglingRef,
            path,
            format!("{} has no port `{}`", descriptor.id(), port.port),
        )),
    }
}

pub(crate) fn resolve_node(
    resolver: &dyn Resolver,
    id: &str,
    node: &NodeSpec,
) -> Result<Arc<ComponentDescriptor>, Violation> {
    resolver.resolve(&node.component, &node.version).ok_or_else(|| {
        Violation::new(
            ViolationCode::UnknownComponent,
            format!("nodes.{id}"),
            format!("{}@{} is not registered", node.component, node.version),
        )
    })
}

pub(crate) fn check_params(id: &str, node: &NodeSpec, descriptor: &ComponentDescriptor, out: &mut Vec<Violation>) {
    for (name, value) in &node.params {
        let path = format!("nodes.{id}.params.{name}");
        match descriptor.param(name) {
            None => out.push(Violation::new(
                ViolationCode::ParamType,
                path,
                format!("{} has no parameter `{name}`", descriptor.id()),
            )),
            Some(spec) => {
                if value.coerce_scalar(&spec.datatype).is_none() {
                    out.push(Violation::new(
                        ViolationCode::ParamType,
                        path,
                        format!("{} value for {} parameter", value.kind_name(), spec.datatype),
                    ));
                }
            }
        }
    }
    for spec in &descriptor.params {
        if spec.default.is_none() && !node.params.contains_key(&spec.name) {
            out.push(Violation::new(
                ViolationCode::ParamType,
                format!("nodes.{id}.params.{}", spec.name),
                "parameter has no default and is not bound",
            ));
        }
    }
}

/// Nodes lying on a cycle of `edges` (empty when acyclic).
pub(crate) fn cyclic_nodes<'a>(nodes: impl Iterator<Item = &'a str>, edges: &'a [(&'a str, &'a str)]) -> Vec<&'a str> {
    let mut indegree: BTreeMap<&str, usize> = nodes.map(|n| (n, 0)).collect();
    for (_, dst) in edges {
        if let Some(d) = indegree.get_mut(dst) {
            *d += 1;
        }
    }
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut done = BTreeSet::new();
    while let Some(n) = ready.pop() {
        done.insert(n);
        for (src, dst) in edges {
            if *src == n {
                if let Some(d) = indegree.get_mut(dst) {
                    *d -= 1;
                    if *d == 0 {
                        ready.push(dst);
                    }
                }
            }
        }
    }
    indegree.keys().filter(|n| !done.contains(*n)).copied().collect()
}

/// Every reason `project` is not runnable; empty iff it can be run.
pub fn validate_project(project: &Project, resolver: &dyn Resolver) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut descriptors = BTreeMap::new();
    for (id, node) in &project.nodes {
        match resolve_node(resolver, id, node) {
            Ok(d) => {
                check_params(id, node, &d, &mut out);
                descriptors.insert(id.as_str(), d);
            }
            Err(v) => out.push(v),
        }
    }

    let mut bound = BTreeSet::new();
    let mut graph = Vec::new();
    for (i, edge) in project.edges.iter().enumerate() {
        let path = format!("edges[{i}]");
        if !bound.insert(&edge.dst) {
            out.push(Violation::new(
                ViolationCode::DuplicateBinding,
                &path,
                format!("`{}` already has a producer", edge.dst),
            ));
        }
        if project.nodes.contains_key(&edge.src.node) && project.nodes.contains_key(&edge.dst.node) {
            graph.push((edge.src.node.as_str(), edge.dst.node.as_str()));
        }
        let ends = (
            endpoint(project, resolver, &edge.src, Direction::Provides, &path),
            endpoint(project, resolver, &edge.dst, Direction::Uses, &path),
        );
        match ends {
            (Ok(provided), Ok(used)) => {
                if let Err(m) = ports_compatible(&provided, &used) {
                    out.push(Violation::new(
                        ViolationCode::TypeMismatch,
                        &path,
                        format!("{edge}: {m}"),
                    ));
                }
            }
            (src, dst) => {
                // unknown components are already reported per node
                for v in [src.err(), dst.err()].into_iter().flatten() {
                    if v.code != ViolationCode::UnknownComponent {
                        out.push(v);
                    }
                }
            }
        }
    }

    let cyclic = cyclic_nodes(project.nodes.keys().map(String::as_str), &graph);
    if !cyclic.is_empty() {
        out.push(Violation::new(
            ViolationCode::Cycle,
            "edges",
            format!("cycle through {}", cyclic.join(", ")),
        ));
    }

    for (id, d) in &descriptors {
        for port in d.uses_ports().filter(|p| p.required) {
            let target = PortRef::new(*id, &port.name);
            if !bound.contains(&target) {
                out.push(Violation::new(
                    ViolationCode::UnboundRequiredUses,
                    target.to_string(),
                    format!("required {} input is not connected", port.datatype),
                ));
            }
        }
    }
    out
}
