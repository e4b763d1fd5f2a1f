use std::sync::Arc;

use super::{CompileRequest, CompileService};
use crate::http::{spawn, Incoming, Method, Reply, ServerHandle};

fn handle(service: &CompileService, req: Incoming) -> Reply {
    if !req.path_is(Method::Post, &["v1", "compile"]) {
        return Reply::not_found();
    }
    let request: CompileRequest = match serde_json::from_slice(&req.body) {
        Ok(r) => r,
        Err(e) => return Reply::error(422, "INVALID_REQUEST", format!("request body: {e}")),
    };
    match service.compile(&request) {
        Ok(result) => Reply::json(200, &result),
        Err(e) => Reply::error(e.status(), e.code(), e.to_string()),
    }
}

/// Serves `POST /v1/compile` on `addr`. Requests beyond the service's job
/// bound wait for a slot and get 503 if none frees up in time.
pub fn serve(service: Arc<CompileService>, addr: &str) -> std::io::Result<ServerHandle> {
    let workers = service.max_jobs() * 2 + 2;
    spawn(addr, workers, move |req| handle(&service, req))
}
