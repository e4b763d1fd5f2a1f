//! The component registry: publish, search, fetch and download counting,
//! backed by an append-only log, with an HTTP service and client.

mod client;
mod server;
mod store;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::RegistryClient;
pub use server::serve;
pub(crate) use server::{parse_type_param, query_from_params};
pub use store::{Store, StoreError, COMPILE_SERVERS_FILE, LOG_FILE};

use crate::model::{ComponentDescriptor, DataType, DescriptorViolation, GlobalName, Version};
use crate::wiring::ports_compatible;

/// A published component. The artifact is stored by reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryRecord {
    pub descriptor: ComponentDescriptor,
    pub artifact_url: String,
    pub published_at: DateTime<Utc>,
    pub download_count: u64,
    pub publisher: String,
}

impl RegistryRecord {
    pub fn new(descriptor: ComponentDescriptor, artifact_url: impl Into<String>, publisher: impl Into<String>) -> Self {
        RegistryRecord {
            descriptor,
            artifact_url: artifact_url.into(),
            published_at: Utc::now(),
            download_count: 0,
            publisher: publisher.into(),
        }
    }

    pub fn id(&self) -> String {
        self.descriptor.id()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileServerEntry {
    pub url: String,
    pub platforms: Vec<String>,
    #[serde(default)]
    pub description: String,
}

pub const DEFAULT_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchQuery {
    /// Case-insensitive substring of name, label, summary, description or a tag.
    pub text: Option<String>,
    /// A classification path; matches the tag itself and everything below it.
    pub tag_prefix: Option<String>,
    /// Some provides port can feed a consumer of this type.
    pub provides_type: Option<DataType>,
    /// Some uses port accepts a value of this type.
    pub uses_type: Option<DataType>,
    pub limit: Option<usize>,
}

impl SearchQuery {
    pub fn text(text: impl Into<String>) -> Self {
        SearchQuery {
            text: Some(text.into()),
            ..Default::default()
        }
    }

    pub fn tag(prefix: impl Into<String>) -> Self {
        SearchQuery {
            tag_prefix: Some(prefix.into()),
            ..Default::default()
        }
    }

    pub fn provides(ty: DataType) -> Self {
        SearchQuery {
            provides_type: Some(ty),
            ..Default::default()
        }
    }

    pub fn uses(ty: DataType) -> Self {
        SearchQuery {
            uses_type: Some(ty),
            ..Default::default()
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn check(&self) -> Result<(), RegistryError> {
        if self.text.is_none() && self.tag_prefix.is_none() && self.provides_type.is_none() && self.uses_type.is_none()
        {
            return Err(RegistryError::InvalidQuery(
                "set at least one of text, tag, provides_type, uses_type".into(),
            ));
        }
        if self.limit == Some(0) {
            return Err(RegistryError::InvalidQuery("limit must be positive".into()));
        }
        Ok(())
    }

    pub fn limit(&self) -> usize {
        self.limit.unwrap_or(DEFAULT_LIMIT)
    }

    /// Whether `d` satisfies every criterion that is set.
    pub fn matches(&self, d: &ComponentDescriptor) -> bool {
        if let Some(text) = &self.text {
            let needle = text.to_lowercase();
            let hay = [
                d.name.as_str(),
                &d.representation.label,
                &d.doc.summary,
                &d.doc.description,
            ];
            if !hay
                .iter()
                .chain(d.tags.iter().map(String::as_str).collect::<Vec<_>>().iter())
                .any(|h| h.to_lowercase().contains(&needle))
            {
                return false;
            }
        }
        if let Some(prefix) = &self.tag_prefix {
            let prefix = prefix.trim_end_matches('/');
            if !d
                .tags
                .iter()
                .any(|t| t == prefix || t.strip_prefix(prefix).is_some_and(|rest| rest.starts_with('/')))
            {
                return false;
            }
        }
        if let Some(ty) = &self.provides_type {
            if !d.provides_ports().any(|p| ports_compatible(&p.datatype, ty).is_ok()) {
                return false;
            }
        }
        if let Some(ty) = &self.uses_type {
            if !d.uses_ports().any(|p| ports_compatible(ty, &p.datatype).is_ok()) {
                return false;
            }
        }
        true
    }
}

/// Ranking: most downloaded first, then name ascending, then newest version.
pub fn rank(a: &RegistryRecord, b: &RegistryRecord) -> std::cmp::Ordering {
    b.download_count
        .cmp(&a.download_count)
        .then_with(|| a.descriptor.name.cmp(&b.descriptor.name))
        .then_with(|| b.descriptor.version.cmp(&a.descriptor.version))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VersionSel {
    Exact(Version),
    Latest,
}

impl std::str::FromStr for VersionSel {
    type Err = crate::model::NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "latest" {
            Ok(VersionSel::Latest)
        } else {
            s.parse().map(VersionSel::Exact)
        }
    }
}

impl std::fmt::Display for VersionSel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VersionSel::Exact(v) => v.fmt(f),
            VersionSel::Latest => f.write_str("latest"),
        }
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("{0} is already registered")]
    Duplicate(String),
    #[error("invalid descriptor: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidDescriptor(Vec<DescriptorViolation>),
    #[error("artifact_url is empty")]
    MissingArtifact,
    #[error("{0} not found")]
    NotFound(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::Duplicate(_) => "DUPLICATE",
            RegistryError::InvalidDescriptor(_) | RegistryError::MissingArtifact => "INVALID_DESCRIPTOR",
            RegistryError::NotFound(_) => "NOT_FOUND",
            RegistryError::InvalidQuery(_) => "INVALID_QUERY",
            RegistryError::Store(_) => "STORE_FAILURE",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            RegistryError::Duplicate(_) => 409,
            RegistryError::InvalidDescriptor(_) | RegistryError::MissingArtifact => 422,
            RegistryError::NotFound(_) => 404,
            RegistryError::InvalidQuery(_) => 400,
            RegistryError::Store(_) => 500,
        }
    }
}

pub(crate) fn not_found(name: &GlobalName, version: &VersionSel) -> RegistryError {
    RegistryError::NotFound(format!("{name}@{version}"))
}
