//! Project execution.
//!
//! The engine flattens compound nodes, validates and schedules the
//! project, instantiates every node through its backend and then runs the
//! schedule level by level. Each node is invoked exactly once; values move
//! along edges by shared reference. A failing node marks its downstream
//! cone as skipped while independent branches carry on.

mod artifacts;
mod builtin;
pub mod codec;
mod plugin;
pub mod protocol;
mod report;
pub mod stdlib;
mod subprocess;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use artifacts::{check_platform, current_platform, ArtifactResolver, LocalArtifacts};
pub use builtin::BuiltinRegistry;
pub use codec::{decode_value, encode_value, CodecError};
pub use report::{NodeError, NodeReport, NodeStatus, RunReport, Totals};

use crate::model::{Backend, ComponentDescriptor, ComponentKind, Direction, Project, Value};
use crate::wiring::{flatten_project, schedule, validate_project, FlattenError, Resolver, Violation};

/// Values keyed by port or parameter name.
pub type PortValues = BTreeMap<String, Value>;

/// Error reported by a component implementation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {detail}")]
pub struct ComponentError {
    pub code: String,
    pub detail: String,
}

impl ComponentError {
    pub fn new(code: impl Into<String>, detail: impl Into<String>) -> Self {
        ComponentError {
            code: code.into(),
            detail: detail.into(),
        }
    }
}

impl From<EngineError> for ComponentError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Component(c) => c,
            other => ComponentError::new(other.code(), other.to_string()),
        }
    }
}

/// What a backend must provide: invocation with already type-checked
/// inputs and parameters.
pub trait Component: Send {
    fn invoke(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, ComponentError>;

    fn close(&mut self) {}
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("artifact missing: {0}")]
    ArtifactMissing(String),
    #[error("handshake mismatch: {0}")]
    HandshakeMismatch(String),
    #[error("entry symbol absent: {0}")]
    EntrySymbolAbsent(String),
    #[error("{0} is not an elementary component")]
    NotElementary(String),
    #[error("required input `{0}` missing")]
    InputMissing(String),
    #[error("input `{port}`: {reason}")]
    InputType { port: String, reason: String },
    #[error("no uses port `{0}`")]
    UnknownInput(String),
    #[error("parameter `{name}`: {reason}")]
    ParamType { name: String, reason: String },
    #[error("output `{port}`: {reason}")]
    OutputType { port: String, reason: String },
    #[error("component error {0}")]
    Component(ComponentError),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("instance is closed")]
    Closed,
    #[error("project is not runnable: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidProject(Vec<Violation>),
    #[error(transparent)]
    Flatten(#[from] FlattenError),
}

impl EngineError {
    pub fn code(&self) -> &str {
        match self {
            EngineError::ArtifactMissing(_) => "ARTIFACT_MISSING",
            EngineError::HandshakeMismatch(_) => "HANDSHAKE_MISMATCH",
            EngineError::EntrySymbolAbsent(_) => "ENTRY_SYMBOL_ABSENT",
            EngineError::NotElementary(_) => "NOT_ELEMENTARY",
            EngineError::InputMissing(_) | EngineError::InputType { .. } | EngineError::UnknownInput(_) => {
                "INPUT_PRECONDITION"
            }
            EngineError::ParamType { .. } => "PARAM_TYPE",
            EngineError::OutputType { .. } => "OUTPUT_TYPE",
            EngineError::Component(c) => &c.code,
            EngineError::Protocol(_) => "PROTOCOL_VIOLATION",
            EngineError::Closed => "CLOSED",
            EngineError::InvalidProject(_) => "INVALID_PROJECT",
            EngineError::Flatten(_) => "FLATTEN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceState {
    Live,
    Closed,
}

/// A live component: the descriptor plus its backend handle.
pub struct ComponentInstance {
    descriptor: Arc<ComponentDescriptor>,
    backend: Backend,
    handle: Box<dyn Component>,
    state: InstanceState,
}

impl fmt::Debug for ComponentInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComponentInstance")
            .field("component", &self.descriptor.id())
            .field("backend", &self.backend)
            .field("state", &self.state)
            .finish()
    }
}

impl ComponentInstance {
    pub fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn state(&self) -> InstanceState {
        self.state
    }

    /// Checks inputs and params against the descriptor, calls the backend
    /// and checks that every provides port came back with the right type.
    pub fn invoke(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, EngineError> {
        if self.state != InstanceState::Live {
            return Err(EngineError::Closed);
        }
        for (port, value) in inputs {
            let spec = self
                .descriptor
                .uses_ports()
                .find(|p| &p.name == port)
                .ok_or_else(|| EngineError::UnknownInput(port.clone()))?;
            value
                .conforms_to(&spec.datatype)
                .map_err(|reason| EngineError::InputType {
                    port: port.clone(),
                    reason,
                })?;
        }
        if let Some(missing) = self
            .descriptor
            .uses_ports()
            .find(|p| p.required && !inputs.contains_key(&p.name))
        {
            return Err(EngineError::InputMissing(missing.name.clone()));
        }
        let params = self.effective_params(params)?;

        let outputs = self.handle.invoke(inputs, &params).map_err(EngineError::Component)?;

        for spec in self.descriptor.provides_ports() {
            let value = outputs.get(&spec.name).ok_or_else(|| EngineError::OutputType {
                port: spec.name.clone(),
                reason: "not produced".into(),
            })?;
            value
                .conforms_to(&spec.datatype)
                .map_err(|reason| EngineError::OutputType {
                    port: spec.name.clone(),
                    reason,
                })?;
        }
        if let Some(extra) = outputs.keys().find(|k| {
            self.descriptor
                .port(k)
                .is_none_or(|p| p.direction != Direction::Provides)
        }) {
            return Err(EngineError::OutputType {
                port: extra.clone(),
                reason: "not a provides port".into(),
            });
        }
        Ok(outputs)
    }

    /// Binds defaults and widens integer literals for real parameters.
    fn effective_params(&self, bound: &PortValues) -> Result<PortValues, EngineError> {
        if let Some(unknown) = bound.keys().find(|k| self.descriptor.param(k).is_none()) {
            return Err(EngineError::ParamType {
                name: unknown.clone(),
                reason: "no such parameter".into(),
            });
        }
        let mut out = PortValues::new();
        for spec in &self.descriptor.params {
            let value = match (bound.get(&spec.name), &spec.default) {
                (Some(v), _) => v.coerce_scalar(&spec.datatype).ok_or_else(|| EngineError::ParamType {
                    name: spec.name.clone(),
                    reason: format!("{} value for {}", v.kind_name(), spec.datatype),
                })?,
                (None, Some(default)) => default.coerce_scalar(&spec.datatype).unwrap_or_else(|| default.clone()),
                (None, None) => {
                    return Err(EngineError::ParamType {
                        name: spec.name.clone(),
                        reason: "not bound and no default".into(),
                    })
                }
            };
            out.insert(spec.name.clone(), value);
        }
        Ok(out)
    }

    pub fn close(&mut self) {
        if self.state == InstanceState::Live {
            self.handle.close();
            self.state = InstanceState::Closed;
        }
    }
}

impl Drop for ComponentInstance {
    fn drop(&mut self) {
        self.close();
    }
}

/// Instantiates components and runs projects.
#[derive(Clone)]
pub struct Engine {
    builtins: Arc<BuiltinRegistry>,
    artifacts: Arc<dyn ArtifactResolver>,
    parallel: bool,
}

impl Engine {
    /// An engine with the given builtins, resolving artifacts relative to
    /// the current directory.
    pub fn new(builtins: BuiltinRegistry) -> Self {
        Engine {
            builtins: Arc::new(builtins),
            artifacts: Arc::new(LocalArtifacts::new([std::path::PathBuf::from(".")])),
            parallel: false,
        }
    }

    pub fn with_artifacts(mut self, artifacts: impl ArtifactResolver + 'static) -> Self {
        self.artifacts = Arc::new(artifacts);
        self
    }

    /// Runs the nodes of a schedule level on separate threads.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn builtins(&self) -> &BuiltinRegistry {
        &self.builtins
    }

    pub fn instantiate(&self, descriptor: &Arc<ComponentDescriptor>) -> Result<ComponentInstance, EngineError> {
        if descriptor.kind != ComponentKind::Elementary {
            return Err(EngineError::NotElementary(descriptor.id()));
        }
        let imp = descriptor
            .implementation
            .as_ref()
            .ok_or_else(|| EngineError::NotElementary(descriptor.id()))?;
        let handle: Box<dyn Component> = match imp.backend {
            Backend::Builtin => {
                check_platform(descriptor)?;
                self.builtins
                    .create(&descriptor.name, &descriptor.version)
                    .ok_or_else(|| {
                        EngineError::ArtifactMissing(format!("no builtin registered as {}", descriptor.id()))
                    })?
            }
            Backend::Subprocess => {
                let path = self.artifacts.locate(descriptor)?;
                Box::new(subprocess::SubprocessComponent::start(Arc::clone(descriptor), path)?)
            }
            Backend::Plugin => {
                let path = self.artifacts.locate(descriptor)?;
                Box::new(plugin::PluginComponent::load(Arc::clone(descriptor), &path)?)
            }
        };
        Ok(ComponentInstance {
            descriptor: Arc::clone(descriptor),
            backend: imp.backend,
            handle,
            state: InstanceState::Live,
        })
    }

    /// Runs a project. Validation failures abort before anything runs;
    /// instantiation and invocation failures are recorded per node.
    pub fn run(&self, project: &Project, resolver: &dyn Resolver) -> Result<RunReport, EngineError> {
        let clock = Clock::start();
        let project_hash = hex::encode(Sha256::digest(project.to_json().as_bytes()));

        let violations = validate_project(project, resolver);
        if !violations.is_empty() {
            return Err(EngineError::InvalidProject(violations));
        }
        let flat = flatten_project(project, resolver)?;
        let violations = validate_project(&flat, resolver);
        if !violations.is_empty() {
            return Err(EngineError::InvalidProject(violations));
        }
        let plan = schedule(&flat).map_err(|v| EngineError::InvalidProject(vec![v]))?;

        let mut results: BTreeMap<String, NodeReport> = BTreeMap::new();
        let mut failed: BTreeSet<String> = BTreeSet::new();
        let mut instances: Vec<ComponentInstance> = Vec::new();

        for level in &plan.levels {
            let mut jobs = Vec::new();
            for id in level {
                let upstream_failed = flat
                    .edges
                    .iter()
                    .any(|e| &e.dst.node == id && failed.contains(&e.src.node));
                if upstream_failed {
                    let now = clock.now_ns();
                    failed.insert(id.clone());
                    results.insert(
                        id.clone(),
                        NodeReport {
                            node: id.clone(),
                            status: NodeStatus::Skipped,
                            start_ns: now,
                            stop_ns: now,
                            outputs: PortValues::new(),
                            error: None,
                        },
                    );
                    continue;
                }
                let node = &flat.nodes[id];
                let mut inputs = PortValues::new();
                for edge in flat.edges.iter().filter(|e| &e.dst.node == id) {
                    let value = results[&edge.src.node].outputs[&edge.src.port].clone();
                    inputs.insert(edge.dst.port.clone(), value);
                }
                let descriptor = resolver
                    .resolve(&node.component, &node.version)
                    .expect("validated project resolves");
                jobs.push(Job {
                    id: id.clone(),
                    descriptor,
                    inputs,
                    params: node.params.clone(),
                });
            }

            let done: Vec<(NodeReport, Option<ComponentInstance>)> = if self.parallel && jobs.len() > 1 {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = jobs
                        .into_iter()
                        .map(|job| scope.spawn(|| self.execute(job, &clock)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("node executor panicked"))
                        .collect()
                })
            } else {
                jobs.into_iter().map(|job| self.execute(job, &clock)).collect()
            };
            for (report, instance) in done {
                if report.status != NodeStatus::Ok {
                    failed.insert(report.node.clone());
                }
                instances.extend(instance);
                results.insert(report.node.clone(), report);
            }
        }
        for mut instance in instances {
            instance.close();
        }

        let nodes: Vec<NodeReport> = plan
            .nodes()
            .map(|id| results.remove(id).expect("every scheduled node has a result"))
            .collect();
        let count = |s: NodeStatus| nodes.iter().filter(|n| n.status == s).count();
        let totals = Totals {
            wall_ns: clock.elapsed_ns(),
            node_count: nodes.len(),
            ok: count(NodeStatus::Ok),
            failed: count(NodeStatus::Error),
            skipped: count(NodeStatus::Skipped),
        };
        Ok(RunReport {
            project_hash,
            nodes,
            totals,
        })
    }

    fn execute(&self, job: Job, clock: &Clock) -> (NodeReport, Option<ComponentInstance>) {
        let start_ns = clock.now_ns();
        let outcome = self
            .instantiate(&job.descriptor)
            .and_then(|mut instance| instance.invoke(&job.inputs, &job.params).map(|out| (out, instance)));
        let stop_ns = clock.now_ns();
        match outcome {
            Ok((outputs, instance)) => (
                NodeReport {
                    node: job.id,
                    status: NodeStatus::Ok,
                    start_ns,
                    stop_ns,
                    outputs,
                    error: None,
                },
                Some(instance),
            ),
            Err(e) => (
                NodeReport {
                    node: job.id,
                    status: NodeStatus::Error,
                    start_ns,
                    stop_ns,
                    outputs: PortValues::new(),
                    error: Some(match e {
                        EngineError::Component(c) => NodeError {
                            code: c.code,
                            detail: c.detail,
                        },
                        other => NodeError {
                            code: other.code().to_string(),
                            detail: other.to_string(),
                        },
                    }),
                },
                None,
            ),
        }
    }
}

struct Job {
    id: String,
    descriptor: Arc<ComponentDescriptor>,
    inputs: PortValues,
    params: PortValues,
}

/// Wall-clock timestamps derived from one monotonic origin, so node times
/// and the total are mutually consistent.
struct Clock {
    epoch_ns: u64,
    origin: Instant,
}

impl Clock {
    fn start() -> Self {
        let epoch_ns = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        Clock {
            epoch_ns,
            origin: Instant::now(),
        }
    }

    fn elapsed_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }

    fn now_ns(&self) -> u64 {
        self.epoch_ns + self.elapsed_ns()
    }
}

#[cfg(test)]
mod tests;
