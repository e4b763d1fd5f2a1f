use super::{CompileServerEntry, RegistryRecord, SearchQuery, VersionSel};
use crate::http::{agent, join, send, ApiError};
use crate::model::{GlobalName, Version};

/// Client for a registry service.
#[derive(Debug, Clone)]
pub struct RegistryClient {
    base: String,
    agent: ureq::Agent,
}

impl RegistryClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8700`.
    pub fn new(base: impl Into<String>) -> Self {
        RegistryClient {
            base: base.into(),
            agent: agent(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, segments: &[&str]) -> String {
        join(&self.base, segments)
    }

    pub fn register(&self, record: &RegistryRecord) -> Result<RegistryRecord, ApiError> {
        let body = serde_json::to_value(record).expect("records serialize");
        send(self.agent.post(&self.url(&["v1", "components"])), Some(&body))
    }

    pub fn search(&self, query: &SearchQuery) -> Result<Vec<RegistryRecord>, ApiError> {
        let mut req = self.agent.get(&self.url(&["v1", "components"]));
        if let Some(t) = &query.text {
            req = req.query("text", t);
        }
        if let Some(t) = &query.tag_prefix {
            req = req.query("tag", t);
        }
        if let Some(t) = &query.provides_type {
            req = req.query("provides_type", &t.to_string());
        }
        if let Some(t) = &query.uses_type {
            req = req.query("uses_type", &t.to_string());
        }
        if let Some(l) = query.limit {
            req = req.query("limit", &l.to_string());
        }
        send(req, None)
    }

    pub fn fetch(&self, name: &GlobalName, version: &VersionSel) -> Result<RegistryRecord, ApiError> {
        let url = self.url(&["v1", "components", name.as_str(), &version.to_string()]);
        send(self.agent.get(&url), None)
    }

    pub fn record_download(&self, name: &GlobalName, version: &Version) -> Result<u64, ApiError> {
        #[derive(serde::Deserialize)]
        struct Count {
            count: u64,
        }
        let url = self.url(&["v1", "components", name.as_str(), &version.to_string(), "downloads"]);
        send::<Count>(self.agent.post(&url), Some(&serde_json::json!({}))).map(|c| c.count)
    }

    pub fn compile_servers(&self) -> Result<Vec<CompileServerEntry>, ApiError> {
        send(self.agent.get(&self.url(&["v1", "compile-servers"])), None)
    }
}
