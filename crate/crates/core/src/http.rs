//! Small HTTP/1.1 JSON plumbing shared by the registry, the compile
//! service and `comodi serve`.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Requests with larger bodies are refused with 413.
pub(crate) const MAX_BODY: usize = 32 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Method {
    Get,
    Post,
    Delete,
    Other,
}

#[derive(Debug)]
pub(crate) struct Incoming {
    pub method: Method,
    /// Percent-decoded path segments, without empty ones.
    pub segments: Vec<String>,
    pub query: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Incoming {
    pub fn path_is(&self, method: Method, pattern: &[&str]) -> bool {
        self.method == method
            && self.segments.len() == pattern.len()
            && self.segments.iter().zip(pattern).all(|(s, p)| p == &"*" || s == p)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.query.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn json<T: DeserializeOwned>(&self) -> Result<T, Reply> {
        serde_json::from_slice(&self.body).map_err(|e| Reply::error(400, "BAD_REQUEST", format!("request body: {e}")))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Error payload of every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub detail: String,
}

#[derive(Serialize, Deserialize)]
struct ErrorEnvelope {
    error: ErrorBody,
}

impl Reply {
    pub fn json(status: u16, value: &impl Serialize) -> Reply {
        Reply {
            status,
            body: serde_json::to_vec(value).expect("replies serialize"),
        }
    }

    /// A body that is already JSON text.
    pub fn raw(status: u16, json: impl Into<Vec<u8>>) -> Reply {
        Reply {
            status,
            body: json.into(),
        }
    }

    pub fn error(status: u16, code: impl Into<String>, detail: impl Into<String>) -> Reply {
        Reply::json(
            status,
            &ErrorEnvelope {
                error: ErrorBody {
                    code: code.into(),
                    detail: detail.into(),
                },
            },
        )
    }

    pub fn not_found() -> Reply {
        Reply::error(404, "NOT_FOUND", "no such endpoint")
    }
}

/// A running server; stops when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://host:port`
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

impl std::fmt::Debug for ServerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServerHandle").field("addr", &self.addr).finish()
    }
}

fn parse(request: &mut tiny_http::Request) -> Result<Incoming, Reply> {
    let method = match request.method() {
        tiny_http::Method::Get => Method::Get,
        tiny_http::Method::Post => Method::Post,
        tiny_http::Method::Delete => Method::Delete,
        _ => Method::Other,
    };
    let (path, query) = request.url().split_once('?').unwrap_or((request.url(), ""));
    let segments = path
        .split('/')
        .filter(|s| !s.is_empty())
        .map(|s| percent_encoding::percent_decode_str(s).decode_utf8_lossy().into_owned())
        .collect();
    let query = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    if request.body_length().is_some_and(|n| n > MAX_BODY) {
        return Err(Reply::error(413, "SIZE_LIMIT", "request body too large"));
    }
    let mut body = Vec::new();
    request
        .as_reader()
        .take(MAX_BODY as u64 + 1)
        .read_to_end(&mut body)
        .map_err(|e| Reply::error(400, "BAD_REQUEST", e.to_string()))?;
    if body.len() > MAX_BODY {
        return Err(Reply::error(413, "SIZE_LIMIT", "request body too large"));
    }
    Ok(Incoming {
        method,
        segments,
        query,
        body,
    })
}

/// Binds `addr` and serves requests on `workers` threads.
pub(crate) fn spawn<H>(addr: &str, workers: usize, handler: H) -> std::io::Result<ServerHandle>
where
    H: Fn(Incoming) -> Reply + Send + Sync + 'static,
{
    let server = Arc::new(tiny_http::Server::http(addr).map_err(std::io::Error::other)?);
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| std::io::Error::other("not an IP listener"))?;
    let handler = Arc::new(handler);
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let handler = Arc::clone(&handler);
            std::thread::spawn(move || {
                while let Ok(mut request) = server.recv() {
                    let reply = match parse(&mut request) {
                        Ok(incoming) => handler(incoming),
                        Err(reply) => reply,
                    };
                    let header =
                        tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
                    let response = tiny_http::Response::from_data(reply.body)
                        .with_status_code(reply.status)
                        .with_header(header);
                    let _ = request.respond(response);
                }
            })
        })
        .collect();
    Ok(ServerHandle { addr, server, workers })
}

/// Failure of a call to one of the HTTP services.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApiError {
    /// The service could not be reached or the connection broke.
    #[error("network error: {0}")]
    Network(String),
    /// The service answered with an error payload.
    #[error("{code} (HTTP {status}): {detail}")]
    Remote { status: u16, code: String, detail: String },
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ApiError {
    pub fn code(&self) -> &str {
        match self {
            ApiError::Network(_) => "NETWORK",
            ApiError::Remote { code, .. } => code,
            ApiError::Decode(_) => "BAD_RESPONSE",
        }
    }
}

pub(crate) fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .timeout_connect(Duration::from_secs(5))
        .timeout(Duration::from_secs(300))
        .build()
}

/// Joins a base URL and path segments, percent-encoding each segment.
pub(crate) fn join(base: &str, segments: &[&str]) -> String {
    let mut url = base.trim_end_matches('/').to_string();
    for s in segments {
        url.push('/');
        url.extend(percent_encoding::utf8_percent_encode(
            s,
            percent_encoding::NON_ALPHANUMERIC,
        ));
    }
    url
}

pub(crate) fn send<T: DeserializeOwned>(
    request: ureq::Request,
    body: Option<&serde_json::Value>,
) -> Result<T, ApiError> {
    let result = match body {
        Some(b) => request.send_json(b),
        None => request.call(),
    };
    match result {
        Ok(response) => response.into_json().map_err(|e| ApiError::Decode(e.to_string())),
        Err(ureq::Error::Status(status, response)) => {
            let text = response.into_string().unwrap_or_default();
            Err(match serde_json::from_str::<ErrorEnvelope>(&text) {
                Ok(env) => ApiError::Remote {
                    status,
                    code: env.error.code,
                    detail: env.error.detail,
                },
                Err(_) => ApiError::Remote {
                    status,
                    code: format!("HTTP_{status}"),
                    detail: text,
                },
            })
        }
        Err(ureq::Error::Transport(t)) => Err(ApiError::Network(t.to_string())),
    }
}
