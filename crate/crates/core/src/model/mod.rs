//! Descriptor data model, port type system, runtime values and the project
//! document.

pub(crate) mod json;
mod names;
mod project;
mod types;
mod value;

pub mod descriptor;

pub use descriptor::{
    parse_descriptor, serialize_descriptor, validate_descriptor, Backend, Behavior, ComponentDescriptor, ComponentKind,
    Composition, DescriptorError, DescriptorViolation, Direction, DocInfo, Implementation, Invariant, ParamSpec,
    PortSpec, Representation,
};
pub use names::{is_identifier, GlobalName, NameError, Version};
pub use project::{is_node_id, Edge, NodeSpec, PortRef, Project, ProjectMeta};
pub use types::{DataType, TypeError, MAX_DEPTH, MAX_RANK};
pub use value::{ArrayData, ArrayValue, ShapeError, Value};
