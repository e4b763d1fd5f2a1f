use super::{CompileRequest, CompileResult};
use crate::http::{agent, join, send, ApiError};
use crate::registry::CompileServerEntry;

/// Client for a compile service. It adds nothing to the server's answer:
/// compile failures come back as `failed` results, service errors as
/// [`ApiError::Remote`] and connection problems as [`ApiError::Network`].
#[derive(Debug, Clone)]
pub struct CompileClient {
    base: String,
    agent: ureq::Agent,
}

impl CompileClient {
    pub fn new(base: impl Into<String>) -> Self {
        CompileClient {
            base: base.into(),
            agent: agent(),
        }
    }

    pub fn compile(&self, req: &CompileRequest) -> Result<CompileResult, ApiError> {
        let body = serde_json::to_value(req).expect("requests serialize");
        send(self.agent.post(&join(&self.base, &["v1", "compile"])), Some(&body))
    }
}

pub fn remote_compile(server: &CompileServerEntry, req: &CompileRequest) -> Result<CompileResult, ApiError> {
    CompileClient::new(server.url.clone()).compile(req)
}
