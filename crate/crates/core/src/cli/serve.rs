//! The project editing API behind `comodi serve`. Every accepted edit is
//! written back to the project file before the reply goes out.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use serde_json::json;

use super::{save_project, Failure};
use crate::engine::{stdlib, Engine, EngineError, LocalArtifacts};
use crate::http::{spawn, ApiError, Incoming, Method, Reply, ServerHandle};
use crate::model::{GlobalName, NodeSpec, PortRef, Project, Value, Version};
use crate::registry::{query_from_params, RegistryClient};
use crate::wiring::{self, ChainResolver, Resolver, Violation};

pub struct ServeOptions {
    /// Project file; loaded at start and rewritten after each edit.
    pub project: PathBuf,
    pub resolver: ChainResolver,
    pub artifacts: LocalArtifacts,
    /// Registry the search proxy forwards to.
    pub registry: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("{0}")]
    Project(String),
    #[error("cannot listen: {0}")]
    Bind(#[source] std::io::Error),
}

struct State {
    path: PathBuf,
    project: Mutex<Project>,
    resolver: ChainResolver,
    artifacts: LocalArtifacts,
    registry: Option<RegistryClient>,
}

/// Starts serving on `addr` (`127.0.0.1:0` picks a free port).
pub fn serve_project(options: ServeOptions, addr: &str) -> Result<ServerHandle, ServeError> {
    let project = super::load_project(&options.project).map_err(|f| ServeError::Project(f.detail))?;
    let state = Arc::new(State {
        path: options.project,
        project: Mutex::new(project),
        resolver: options.resolver,
        artifacts: options.artifacts,
        registry: options.registry.map(RegistryClient::new),
    });
    spawn(addr, 4, move |req| handle(&state, req)).map_err(ServeError::Bind)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewNode {
    id: String,
    component: GlobalName,
    #[serde(default)]
    version: Option<Version>,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewEdge {
    src: PortRef,
    dst: PortRef,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Replacement {
    component: GlobalName,
    #[serde(default)]
    version: Option<Version>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunOptions {
    #[serde(default)]
    parallel: bool,
}

fn refused(v: &Violation) -> Reply {
    Reply::json(
        409,
        &json!({ "error": { "code": v.code.as_str(), "detail": v.to_string() }, "violation": v }),
    )
}

fn io_failure(f: Failure) -> Reply {
    Reply::error(500, f.code, f.detail)
}

fn handle(state: &State, req: Incoming) -> Reply {
    let seg: Vec<&str> = req.segments.iter().map(String::as_str).collect();
    let result = match (req.method, seg.as_slice()) {
        (Method::Get, ["api", "project"]) => Ok(Reply::json(200, &*state.project.lock().expect("project lock"))),
        (Method::Post, ["api", "project", "nodes"]) => add_node(state, &req),
        (Method::Delete, ["api", "project", "nodes", id]) => edit(state, |p| {
            wiring::remove_node(p, id).map_err(|v| Reply::error(404, v.code.as_str(), v.to_string()))
        }),
        (Method::Post, ["api", "project", "edges"]) => req.json::<NewEdge>().and_then(|e| {
            edit(state, |p| {
                wiring::connect(p, &e.src, &e.dst, &state.resolver).map_err(|v| refused(&v))
            })
        }),
        (Method::Get, ["api", "project", "nodes", id, "substitutes"]) => substitutes(state, id),
        (Method::Post, ["api", "project", "nodes", id, "replace"]) => replace(state, id, &req),
        (Method::Post, ["api", "project", "validate"]) => {
            let p = state.project.lock().expect("project lock").clone();
            Ok(Reply::json(
                200,
                &json!({ "violations": wiring::validate_project(&p, &state.resolver) }),
            ))
        }
        (Method::Post, ["api", "project", "run"]) => run(state, &req),
        (Method::Get, ["api", "registry", "search"]) => search(state, &req),
        _ => Err(Reply::not_found()),
    };
    result.unwrap_or_else(|r| r)
}

/// Applies an edit under the lock and persists it; the in-memory project
/// only changes once the file is written.
fn edit(state: &State, f: impl FnOnce(&Project) -> Result<Project, Reply>) -> Result<Reply, Reply> {
    let mut guard = state.project.lock().expect("project lock");
    let next = f(&guard)?;
    save_project(&state.path, &next).map_err(io_failure)?;
    *guard = next;
    Ok(Reply::json(200, &*guard))
}

fn pick(
    state: &State,
    name: &GlobalName,
    version: Option<Version>,
) -> Result<Arc<crate::model::ComponentDescriptor>, Reply> {
    let found = match version {
        Some(v) => state.resolver.resolve(name, &v),
        None => state
            .resolver
            .catalog()
            .into_iter()
            .filter(|d| &d.name == name)
            .max_by_key(|d| d.version),
    };
    found.ok_or_else(|| Reply::error(404, "UNKNOWN_COMPONENT", format!("{name} is not known")))
}

fn add_node(state: &State, req: &Incoming) -> Result<Reply, Reply> {
    let body: NewNode = req.json()?;
    let descriptor = pick(state, &body.component, body.version)?;
    let mut node = NodeSpec::new(descriptor.name.clone(), descriptor.version);
    for (k, raw) in &body.params {
        let v =
            Value::scalar_from_json(raw).map_err(|e| Reply::error(400, "BAD_REQUEST", format!("param {k}: {e}")))?;
        let v = match descriptor.param(k) {
            Some(spec) => v.coerce_scalar(&spec.datatype).unwrap_or(v),
            None => v,
        };
        node.params.insert(k.clone(), v);
    }
    edit(state, |p| {
        wiring::add_node(p, &body.id, node, &state.resolver).map_err(|v| refused(&v))
    })
}

fn substitutes(state: &State, id: &str) -> Result<Reply, Reply> {
    let p = state.project.lock().expect("project lock").clone();
    let Some(node) = p.nodes.get(id) else {
        return Err(Reply::error(404, "DANGLING_REF", format!("no node `{id}`")));
    };
    let reports: Vec<_> = state
        .resolver
        .catalog()
        .iter()
        .filter(|d| !(d.name == node.component && d.version == node.version))
        .map(|d| wiring::substitutable(&p, id, d, &state.resolver))
        .filter(|r| r.ok)
        .collect();
    Ok(Reply::json(200, &reports))
}

fn replace(state: &State, id: &str, req: &Incoming) -> Result<Reply, Reply> {
    let body: Replacement = req.json()?;
    let candidate = pick(state, &body.component, body.version)?;
    edit(state, |p| {
        if !p.nodes.contains_key(id) {
            return Err(Reply::error(404, "DANGLING_REF", format!("no node `{id}`")));
        }
        wiring::replace_node(p, id, &candidate, &state.resolver).map_err(|report| {
            Reply::json(
                409,
                &json!({ "error": { "code": "NOT_SUBSTITUTABLE", "detail": report.to_string() }, "report": report }),
            )
        })
    })
}

fn run(state: &State, req: &Incoming) -> Result<Reply, Reply> {
    let options: RunOptions = if req.body.iter().all(u8::is_ascii_whitespace) {
        RunOptions::default()
    } else {
        req.json()?
    };
    let p = state.project.lock().expect("project lock").clone();
    let engine = Engine::new(stdlib::examples())
        .with_artifacts(state.artifacts.clone())
        .parallel(options.parallel);
    match engine.run(&p, &state.resolver) {
        Ok(report) => Ok(Reply::raw(200, report.to_json())),
        Err(EngineError::InvalidProject(vs)) => Err(Reply::json(
            409,
            &json!({ "error": { "code": "INVALID_PROJECT", "detail": format!("{} violation(s)", vs.len()) }, "violations": vs }),
        )),
        Err(e) => Err(Reply::error(500, e.code(), e.to_string())),
    }
}

fn search(state: &State, req: &Incoming) -> Result<Reply, Reply> {
    let query = query_from_params(req)?;
    let client = state
        .registry
        .as_ref()
        .ok_or_else(|| Reply::error(503, "NO_REGISTRY", "no registry configured"))?;
    match client.search(&query) {
        Ok(hits) => Ok(Reply::json(200, &hits)),
        Err(ApiError::Remote { status, code, detail }) => Err(Reply::error(status, code, detail)),
        Err(e) => Err(Reply::error(502, e.code(), e.to_string())),
    }
}
