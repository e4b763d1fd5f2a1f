//! Compound components: packaging a project behind promoted ports, and
//! expanding compounds back into elementary nodes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::validate::resolve_node;
use super::{validate_project, Resolver, Violation, ViolationCode};
use crate::model::{
    Behavior, ComponentDescriptor, ComponentKind, Composition, Direction, DocInfo, Edge, GlobalName, NodeSpec, PortRef,
    PortSpec, Project, Representation, Version,
};

/// Compound references deeper than this are treated as a reference cycle.
pub const MAX_NESTING: usize = 32;

#[derive(Debug, Clone)]
pub struct CompoundIdentity {
    pub name: GlobalName,
    pub version: Version,
    pub doc: DocInfo,
    pub tags: Vec<String>,
}

impl CompoundIdentity {
    pub fn new(name: GlobalName, version: Version) -> Self {
        CompoundIdentity {
            name,
            version,
            doc: DocInfo::default(),
            tags: vec!["general".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("cannot promote `{0}`: it is already bound by an inner edge")]
    BoundPromotion(PortRef),
    #[error("outer port name `{0}` is used by more than one promotion")]
    DuplicateOuterName(String),
    #[error("promotion target `{0}` does not exist")]
    DanglingPromotion(PortRef),
    #[error("outer port name `{0}` is not an identifier")]
    BadOuterName(String),
    #[error("inner project is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidProject(Vec<Violation>),
}

/// Packages `project` as a compound component whose ports are the promoted
/// inner ports, with the inner datatypes and directions.
pub fn compose_compound(
    project: &Project,
    promotions: &BTreeMap<PortRef, String>,
    identity: CompoundIdentity,
    resolver: &dyn Resolver,
) -> Result<ComponentDescriptor, ComposeError> {
    let mut outer_names = BTreeSet::new();
    let mut ports = Vec::new();
    for (inner, outer) in promotions {
        if !crate::model::is_identifier(outer) {
            return Err(ComposeError::BadOuterName(outer.clone()));
        }
        if !outer_names.insert(outer.as_str()) {
            return Err(ComposeError::DuplicateOuterName(outer.clone()));
        }
        let spec = project
            .nodes
            .get(&inner.node)
            .and_then(|n| resolve_node(resolver, &inner.node, n).ok())
            .and_then(|d| d.port(&inner.port).cloned())
            .ok_or_else(|| ComposeError::DanglingPromotion(inner.clone()))?;
        if spec.direction == Direction::Uses && project.edge_into(inner).is_some() {
            return Err(ComposeError::BoundPromotion(inner.clone()));
        }
        ports.push(PortSpec {
            name: outer.clone(),
            ..spec
        });
    }

    let promoted_inputs: BTreeSet<String> = promotions.keys().map(ToString::to_string).collect();
    let violations: Vec<Violation> = validate_project(project, resolver)
        .into_iter()
        .filter(|v| !(v.code == ViolationCode::UnboundRequiredUses && promoted_inputs.contains(&v.path)))
        .collect();
    if !violations.is_empty() {
        return Err(ComposeError::InvalidProject(violations));
    }

    let inner: Vec<_> = project
        .nodes
        .iter()
        .filter_map(|(id, n)| resolve_node(resolver, id, n).ok())
        .collect();
    let behavior = Behavior {
        deterministic: inner.iter().all(|d| d.behavior.deterministic),
        stateful: inner.iter().any(|d| d.behavior.stateful),
    };
    Ok(ComponentDescriptor {
        representation: Representation {
            label: identity.name.leaf().to_string(),
            category: "compound".into(),
        },
        name: identity.name,
        version: identity.version,
        kind: ComponentKind::Compound,
        doc: identity.doc,
        tags: identity.tags,
        ports,
        params: Vec::new(),
        behavior,
        implementation: None,
        composition: Some(Composition {
            project: project.clone(),
            promotions: promotions.clone(),
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlattenError {
    #[error("{0} is not a compound component")]
    NotCompound(String),
    #[error("unknown component: {0}")]
    UnknownComponent(Violation),
    #[error("compound nesting exceeds {MAX_NESTING} levels at `{0}` (reference cycle?)")]
    NestingTooDeep(String),
    #[error("edge {edge} references port `{port}` that is not promoted by its compound")]
    UnpromotedPort { edge: String, port: String },
}

/// Expands a compound descriptor into a project of elementary nodes only.
pub fn flatten_compound(descriptor: &ComponentDescriptor, resolver: &dyn Resolver) -> Result<Project, FlattenError> {
    let composition = descriptor
        .composition
        .as_ref()
        .filter(|_| descriptor.kind == ComponentKind::Compound)
        .ok_or_else(|| FlattenError::NotCompound(descriptor.id()))?;
    let mut out = Project {
        meta: composition.project.meta.clone(),
        ..Default::default()
    };
    expand(&composition.project, "", 1, resolver, &mut out)?;
    Ok(out)
}

/// Expands every compound node of `project`; ids of expanded nodes become
/// `<compound id>/<inner id>`.
pub fn flatten_project(project: &Project, resolver: &dyn Resolver) -> Result<Project, FlattenError> {
    let mut out = Project {
        meta: project.meta.clone(),
        ..Default::default()
    };
    expand(project, "", 0, resolver, &mut out)?;
    Ok(out)
}

/// How a local node's ports map into the flat project.
enum Expansion {
    Elementary(String),
    /// outer port name -> flat elementary port
    Compound(BTreeMap<String, PortRef>),
}

fn expand(
    project: &Project,
    prefix: &str,
    depth: usize,
    resolver: &dyn Resolver,
    out: &mut Project,
) -> Result<BTreeMap<String, Expansion>, FlattenError> {
    let mut expansions = BTreeMap::new();
    for (id, node) in &project.nodes {
        let flat_id = format!("{prefix}{id}");
        let descriptor = resolve_node(resolver, &flat_id, node).map_err(FlattenError::UnknownComponent)?;
        let expansion = match (&descriptor.kind, &descriptor.composition) {
            (ComponentKind::Compound, Some(comp)) => {
                if depth >= MAX_NESTING {
                    return Err(FlattenError::NestingTooDeep(flat_id));
                }
                let inner = expand(&comp.project, &format!("{flat_id}/"), depth + 1, resolver, out)?;
                let mut ports = BTreeMap::new();
                for (inner_ref, outer) in &comp.promotions {
                    if let Some(flat) = map_port(&inner, inner_ref) {
                        ports.insert(outer.clone(), flat);
                    }
                }
                Expansion::Compound(ports)
            }
            _ => {
                out.nodes.insert(flat_id.clone(), NodeSpec::clone(node));
                Expansion::Elementary(flat_id)
            }
        };
        expansions.insert(id.clone(), expansion);
    }
    for edge in &project.edges {
        let lookup = |port: &PortRef| {
            map_port(&expansions, port).ok_or_else(|| FlattenError::UnpromotedPort {
                edge: edge.to_string(),
                port: port.to_string(),
            })
        };
        out.edges.push(Edge::new(lookup(&edge.src)?, lookup(&edge.dst)?));
    }
    Ok(expansions)
}

fn map_port(expansions: &BTreeMap<String, Expansion>, local: &PortRef) -> Option<PortRef> {
    match expansions.get(&local.node)? {
        Expansion::Elementary(flat) => Some(PortRef::new(flat.clone(), local.port.clone())),
        Expansion::Compound(ports) => ports.get(&local.port).cloned(),
    }
}
