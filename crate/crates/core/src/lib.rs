//! Component integration for computational science.
//!
//! Plain procedural routines are wrapped as described components with typed
//! *uses* (input) and *provides* (output) ports, published to a registry,
//! composed into validated dataflow projects and executed.
//!
//! The crate is organized along the lifecycle of a component:
//!
//! - [`model`]: component descriptors, the port type system, runtime values
//!   and the project document.
//! - [`gluegen`]: the signature DSL and generation of wrapper ("glue") code
//!   that adapts an unmodified routine to the subprocess protocol.
//! - [`buildsvc`]: the compilation service (server and client).
//! - [`registry`]: the component registry (store, HTTP service and client).
//! - [`wiring`]: port compatibility, project editing and validation,
//!   substitution, compound components and scheduling.
//! - [`engine`]: execution of projects through builtin, subprocess and
//!   plugin backends.
//! - [`cli`]: the `comodi` command line tool and its local project API.
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run -p comodi --example pipeline
//! ```

pub mod buildsvc;
pub mod cli;
pub mod engine;
pub mod gluegen;
mod http;
pub mod model;
pub mod registry;
pub mod wiring;

pub use engine::{Engine, RunReport};
pub use http::{ApiError, ErrorBody, ServerHandle};
pub use model::{ComponentDescriptor, DataType, GlobalName, Project, Value, Version};
