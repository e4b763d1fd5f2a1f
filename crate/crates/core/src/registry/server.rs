//! HTTP front end of the registry.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::{RegistryError, RegistryRecord, SearchQuery, Store, VersionSel};
use crate::http::{spawn, Incoming, Method, Reply, ServerHandle};
use crate::model::{ComponentDescriptor, DataType, GlobalName};

/// Body of `POST /v1/components`. The download count is owned by the
/// registry; the publication time defaults to now.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Publication {
    descriptor: ComponentDescriptor,
    artifact_url: String,
    #[serde(default)]
    publisher: String,
    #[serde(default)]
    published_at: Option<DateTime<Utc>>,
    #[serde(default)]
    #[allow(dead_code)]
    download_count: Option<u64>,
}

fn failure(e: RegistryError) -> Reply {
    Reply::error(e.status(), e.code(), e.to_string())
}

/// Accepts either the DSL spelling (`array<real64,1>`) or the JSON form.
pub(crate) fn parse_type_param(text: &str) -> Result<DataType, String> {
    if text.trim_start().starts_with('{') {
        let ty: DataType = serde_json::from_str(text).map_err(|e| e.to_string())?;
        ty.check().map_err(|e| e.to_string())?;
        Ok(ty)
    } else {
        crate::gluegen::parse_type(text).map_err(|e| e.to_string())
    }
}

pub(crate) fn query_from_params(req: &Incoming) -> Result<SearchQuery, Reply> {
    let bad = |detail: String| Reply::error(400, "INVALID_QUERY", detail);
    let nonempty = |key: &str| req.param(key).filter(|v| !v.is_empty());
    let ty = |key: &str| -> Result<Option<DataType>, Reply> {
        nonempty(key)
            .map(|t| parse_type_param(t).map_err(|e| bad(format!("{key}: {e}"))))
            .transpose()
    };
    let limit = nonempty("limit")
        .map(|l| {
            l.parse::<usize>()
                .map_err(|_| bad(format!("limit: `{l}` is not a positive integer")))
        })
        .transpose()?;
    let query = SearchQuery {
        text: nonempty("text").map(str::to_string),
        tag_prefix: nonempty("tag").map(str::to_string),
        provides_type: ty("provides_type")?,
        uses_type: ty("uses_type")?,
        limit,
    };
    query.check().map_err(failure)?;
    Ok(query)
}

fn name_and_version(name: &str, version: &str) -> Result<(GlobalName, VersionSel), Reply> {
    let name = name
        .parse()
        .map_err(|e| Reply::error(400, "BAD_REQUEST", format!("component name: {e}")))?;
    let version = version
        .parse()
        .map_err(|e| Reply::error(400, "BAD_REQUEST", format!("version: {e}")))?;
    Ok((name, version))
}

fn handle(store: &Store, req: Incoming) -> Reply {
    let seg: Vec<&str> = req.segments.iter().map(String::as_str).collect();
    let result = if req.path_is(Method::Post, &["v1", "components"]) {
        register(store, &req)
    } else if req.path_is(Method::Get, &["v1", "components"]) {
        query_from_params(&req).and_then(|q| {
            store
                .search(&q)
                .map(|hits| Reply::json(200, &hits.iter().map(|r| &**r).collect::<Vec<_>>()))
                .map_err(failure)
        })
    } else if req.path_is(Method::Get, &["v1", "components", "*", "*"]) {
        name_and_version(seg[2], seg[3])
            .and_then(|(n, v)| store.fetch(&n, &v).map(|r| Reply::json(200, &*r)).map_err(failure))
    } else if req.path_is(Method::Post, &["v1", "components", "*", "*", "downloads"]) {
        name_and_version(seg[2], seg[3]).and_then(|(n, v)| {
            let v = match v {
                VersionSel::Exact(v) => v,
                VersionSel::Latest => store.fetch(&n, &v).map_err(failure)?.descriptor.version,
            };
            store
                .record_download(&n, &v)
                .map(|count| Reply::json(200, &serde_json::json!({ "count": count })))
                .map_err(failure)
        })
    } else if req.path_is(Method::Get, &["v1", "compile-servers"]) {
        store
            .list_compile_servers()
            .map(|list| Reply::json(200, &list))
            .map_err(|e| Reply::error(500, "STORE_FAILURE", e.to_string()))
    } else {
        Err(Reply::not_found())
    };
    result.unwrap_or_else(|reply| reply)
}

fn register(store: &Store, req: &Incoming) -> Result<Reply, Reply> {
    let body: serde_json::Value = req.json()?;
    let p: Publication =
        serde_json::from_value(body).map_err(|e| Reply::error(422, "INVALID_DESCRIPTOR", e.to_string()))?;
    let record = RegistryRecord {
        descriptor: p.descriptor,
        artifact_url: p.artifact_url,
        published_at: p.published_at.unwrap_or_else(Utc::now),
        download_count: 0,
        publisher: p.publisher,
    };
    store.register(record).map(|r| Reply::json(201, &*r)).map_err(failure)
}

/// Serves the registry API on `addr` (e.g. `127.0.0.1:0`).
pub fn serve(store: Arc<Store>, addr: &str) -> std::io::Result<ServerHandle> {
    spawn(addr, 8, move |req| handle(&store, req))
}
