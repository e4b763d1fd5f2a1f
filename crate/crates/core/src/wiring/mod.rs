//! Building and checking dataflow projects.

mod compat;
mod compound;
mod edit;
mod resolve;
mod schedule;
mod substitute;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use compat::{ports_compatible, Mismatch};
pub use compound::{
    compose_compound, flatten_compound, flatten_project, ComposeError, CompoundIdentity, FlattenError, MAX_NESTING,
};
pub use edit::{add_node, connect, disconnect, remove_node};
pub use resolve::{ChainResolver, Library, LoadError, Resolver};
pub use schedule::{schedule, Schedule};
pub use substitute::{replace_node, substitutable, ParamCheck, PortCheck, PortStatus, SubstitutionReport};
pub use validate::validate_project;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    UnboundRequiredUses,
    TypeMismatch,
    Cycle,
    DanglingRef,
    DuplicateBinding,
    UnknownComponent,
    ParamType,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnboundRequiredUses => "UNBOUND_REQUIRED_USES",
            ViolationCode::TypeMismatch => "TYPE_MISMATCH",
            ViolationCode::Cycle => "CYCLE",
            ViolationCode::DanglingRef => "DANGLING_REF",
            ViolationCode::DuplicateBinding => "DUPLICATE_BINDING",
            ViolationCode::UnknownComponent => "UNKNOWN_COMPONENT",
            ViolationCode::ParamType => "PARAM_TYPE",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A reason a project is not runnable, or an edit was refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Project location, e.g. `nodes.sq`, `edges[2]`, `sink.x`.
    pub path: String,
    pub detail: String,
}

impl Violation {
    pub fn new(code: ViolationCode, path: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation {
            code,
            path: path.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.detail)
    }
}

impl std::error::Error for Violation {}

#[cfg(test)]
mod tests;
