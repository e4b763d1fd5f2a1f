//! The compile service: turns a bundle of sources into an artifact by
//! running a configured toolchain command in a private scratch directory.
//!
//! Toolchains are listed in `toolchains.json`:
//!
//! ```json
//! [{"platform": "any", "language": "python", "command": "cat {SRC_DIR}/*.py > {OUT_FILE}"}]
//! ```
//!
//! `{SRC_DIR}` and `{OUT_FILE}` are replaced by shell-quoted paths and the
//! command runs under `sh -c` with the source directory as working
//! directory.

mod client;
mod server;

use std::collections::BTreeMap;
use std::path::{Component, Path};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{remote_compile, CompileClient};
pub use server::serve;

pub const MAX_REQUEST_BYTES: usize = 16 << 20;
pub const TOOLCHAINS_FILE: &str = "toolchains.json";

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
            match bytes {
                Some(b) => super::serialize(b, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|t| STANDARD.decode(t).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub path: String,
    #[serde(with = "base64_bytes")]
    pub content: Vec<u8>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<Vec<u8>>) -> Self {
        SourceFile {
            path: path.into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileRequest {
    pub platform: String,
    pub language: String,
    pub sources: Vec<SourceFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_hint: Option<String>,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
}

impl CompileRequest {
    pub fn new(platform: impl Into<String>, language: impl Into<String>) -> Self {
        CompileRequest {
            platform: platform.into(),
            language: language.into(),
            sources: Vec::new(),
            entry_hint: None,
            options: BTreeMap::new(),
        }
    }

    pub fn with_source(mut self, path: impl Into<String>, content: impl Into<Vec<u8>>) -> Self {
        self.sources.push(SourceFile::new(path, content));
        self
    }

    /// Checks the request guards; runs before any toolchain is touched.
    pub fn check(&self) -> Result<(), CompileError> {
        if self.sources.is_empty() {
            return Err(CompileError::InvalidRequest("at least one source is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sources {
            let path = Path::new(&s.path);
            let plain = !s.path.is_empty()
                && !s.path.contains('\\')
                && path.components().all(|c| matches!(c, Component::Normal(_)));
            if !plain {
                return Err(CompileError::InvalidRequest(format!(
                    "source path `{}` must be relative without `..`",
                    s.path
                )));
            }
            if !seen.insert(path.components().collect::<Vec<_>>()) {
                return Err(CompileError::InvalidRequest(format!(
                    "source path `{}` given twice",
                    s.path
                )));
            }
        }
        let total: usize = self.sources.iter().map(|s| s.content.len()).sum();
        if total > MAX_REQUEST_BYTES {
            return Err(CompileError::SizeLimit(total));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileResult {
    pub status: CompileStatus,
    #[serde(default, with = "base64_bytes::option", skip_serializing_if = "Option::is_none")]
    pub artifact: Option<Vec<u8>>,
    pub log: String,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("no toolchain for {language} on {platform}")]
    UnsupportedTarget { platform: String, language: String },
    #[error("sources total {0} bytes, over the 16 MiB limit")]
    SizeLimit(usize),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("toolchain could not run: {0}")]
    ToolchainFailure(String),
    #[error("compile service busy")]
    Busy,
}

impl CompileError {
    pub fn code(&self) -> &'static str {
        match self {
            CompileError::UnsupportedTarget { .. } => "UNSUPPORTED_TARGET",
            CompileError::SizeLimit(_) => "SIZE_LIMIT",
            CompileError::InvalidRequest(_) => "INVALID_REQUEST",
            CompileError::ToolchainFailure(_) => "TOOLCHAIN_FAILURE",
            CompileError::Busy => "BUSY",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            CompileError::ToolchainFailure(_) => 500,
            CompileError::Busy => 503,
            _ => 422,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toolchain {
    /// A platform id, or `any`.
    pub platform: String,
    pub language: String,
    pub command: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Toolchains(pub Vec<Toolchain>);

impl Toolchains {
    pub fn load(path: impl AsRef<Path>) -> Result<Toolchains, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn with(mut self, platform: &str, language: &str, command: &str) -> Self {
        self.0.push(Toolchain {
            platform: platform.into(),
            language: language.into(),
            command: command.into(),
        });
        self
    }

    /// First entry for the language whose platform is the requested one
    /// or `any`.
    pub fn find(&self, platform: &str, language: &str) -> Option<&Toolchain> {
        self.0
            .iter()
            .find(|t| t.language == language && (t.platform == platform || t.platform == "any"))
    }
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

fn diagnostics(log: &str) -> Vec<Diagnostic> {
    let re = Regex::new(r"(?m)^([^\s:][^:\n]*):(\d+):(?:\d+:)?\s*(.+)$").expect("static pattern");
    re.captures_iter(log)
        .filter_map(|c| {
            Some(Diagnostic {
                file: c[1].to_string(),
                line: c[2].parse().ok()?,
                message: c[3].trim().to_string(),
            })
        })
        .collect()
}

/// Compiles `req` with the matching toolchain. A toolchain that exits
/// nonzero yields a `failed` result rather than an error.
pub fn compile(req: &CompileRequest, toolchains: &Toolchains) -> Result<CompileResult, CompileError> {
    req.check()?;
    let toolchain = toolchains
        .find(&req.platform, &req.language)
        .ok_or_else(|| CompileError::UnsupportedTarget {
            platform: req.platform.clone(),
            language: req.language.clone(),
        })?;
    let io = |e: std::io::Error| CompileError::ToolchainFailure(e.to_string());
    let scratch = tempfile::Builder::new().prefix("comodi-build-").tempdir().map_err(io)?;
    let src_dir = scratch.path().join("src");
    let out_dir = scratch.path().join("out");
    std::fs::create_dir_all(&out_dir).map_err(io)?;
    for s in &req.sources {
        let path = src_dir.join(&s.path);
        std::fs::create_dir_all(path.parent().expect("joined path has a parent")).map_err(io)?;
        std::fs::write(&path, &s.content).map_err(io)?;
    }
    std::fs::create_dir_all(&src_dir).map_err(io)?;
    let out_file = out_dir.join("artifact");
    let command = toolchain
        .command
        .replace("{SRC_DIR}", &shell_quote(&src_dir))
        .replace("{OUT_FILE}", &shell_quote(&out_file));
    let output = Command::new("sh")
        .arg("-c")
        .arg(format!("exec 2>&1\n{command}"))
        .current_dir(&src_dir)
        .stdin(Stdio::null())
        .output()
        .map_err(io)?;
    let src_prefix = format!("{}/", src_dir.display());
    let mut log = String::from_utf8_lossy(&output.stdout).replace(&src_prefix, "");
    let failed = |log: String| {
        Ok(CompileResult {
            status: CompileStatus::Failed,
            artifact: None,
            diagnostics: diagnostics(&log),
            log,
        })
    };
    if !output.status.success() {
        if log.trim().is_empty() {
            log = format!("toolchain exited with {}", output.status);
        }
        return failed(log);
    }
    match std::fs::read(&out_file) {
        Ok(artifact) => Ok(CompileResult {
            status: CompileStatus::Ok,
            artifact: Some(artifact),
            diagnostics: diagnostics(&log),
            log,
        }),
        Err(_) => {
            log.push_str("toolchain succeeded but wrote no artifact\n");
            failed(log)
        }
    }
}

/// A compile service with a bound on simultaneous toolchain runs.
#[derive(Debug)]
pub struct CompileService {
    toolchains: Toolchains,
    max_jobs: usize,
    queue_wait: Duration,
    running: Mutex<usize>,
    freed: Condvar,
}

impl CompileService {
    pub fn new(toolchains: Toolchains, max_jobs: usize) -> Self {
        CompileService {
            toolchains,
            max_jobs: max_jobs.max(1),
            queue_wait: Duration::from_secs(60),
            running: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    /// How long a request may wait for a free slot before `BUSY`.
    pub fn with_queue_wait(mut self, wait: Duration) -> Self {
        self.queue_wait = wait;
        self
    }

    pub fn max_jobs(&self) -> usize {
        self.max_jobs
    }

    pub fn toolchains(&self) -> &Toolchains {
        &self.toolchains
    }

    pub fn compile(&self, req: &CompileRequest) -> Result<CompileResult, CompileError> {
        req.check()?;
        {
            let running = self.running.lock().unwrap_or_else(|e| e.into_inner());
            let (mut running, timeout) = self
                .freed
                .wait_timeout_while(running, self.queue_wait, |n| *n >= self.max_jobs)
                .unwrap_or_else(|e| e.into_inner());
            if timeout.timed_out() && *running >= self.max_jobs {
                return Err(CompileError::Busy);
            }
            *running += 1;
        }
        let result = compile(req, &self.toolchains);
        *self.running.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.freed.notify_one();
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stub() -> Toolchains {
        Toolchains::default()
            .with("any", "copy", "cp \"$(ls | head -n 1)\" {OUT_FILE}")
            .with(
                "any",
                "fail",
                "echo 'main.c:3:5: error: expected `;`' ; echo done; exit 2",
            )
            .with("any", "silent", "true")
    }

    #[test]
    fn stub_copy_returns_the_source() {
        let req = CompileRequest::new("linux-x86_64", "copy").with_source("a.txt", b"payload\n".to_vec());
        let res = compile(&req, &stub()).unwrap();
        assert_eq!(res.status, CompileStatus::Ok);
        assert_eq!(res.artifact.as_deref(), Some(&b"payload\n"[..]));
    }

    #[test]
    fn nonzero_exit_is_a_failed_result() {
        let req = CompileRequest::new("x", "fail").with_source("main.c", b"int main(){}".to_vec());
        let res = compile(&req, &stub()).unwrap();
        assert_eq!(res.status, CompileStatus::Failed);
        assert!(res.artifact.is_none());
        assert!(res.log.contains("done"));
        assert_eq!(
            res.diagnostics,
            [Diagnostic {
                file: "main.c".into(),
                line: 3,
                message: "error: expected `;`".into()
            }]
        );
        let req = CompileRequest::new("x", "silent").with_source("a", b"".to_vec());
        let res = compile(&req, &stub()).unwrap();
        assert_eq!(res.status, CompileStatus::Failed);
        assert!(!res.log.is_empty());
    }

    #[test]
    fn guards_run_before_the_toolchain() {
        let marker = tempfile::tempdir().unwrap();
        let touch = format!("touch {}", shell_quote(&marker.path().join("ran")));
        let chains = Toolchains::default().with("any", "touch", &touch);
        for bad in ["../x", "/etc/passwd", "a/../../b", ""] {
            let req = CompileRequest::new("p", "touch").with_source(bad, b"x".to_vec());
            assert_eq!(compile(&req, &chains).unwrap_err().code(), "INVALID_REQUEST", "{bad}");
        }
        let big = CompileRequest::new("p", "touch").with_source("big", vec![0u8; MAX_REQUEST_BYTES + 1]);
        assert_eq!(compile(&big, &chains).unwrap_err().code(), "SIZE_LIMIT");
        let none = CompileRequest::new("p", "touch");
        assert_eq!(compile(&none, &chains).unwrap_err().code(), "INVALID_REQUEST");
        assert!(!marker.path().join("ran").exists());
        let req = CompileRequest::new("p", "rust").with_source("a", b"".to_vec());
        assert_eq!(compile(&req, &chains).unwrap_err().code(), "UNSUPPORTED_TARGET");
    }

    #[test]
    fn nested_sources_and_quoting() {
        let chains = Toolchains::default().with("any", "cat", "cat {SRC_DIR}/dir/b {SRC_DIR}/a > {OUT_FILE}");
        let req = CompileRequest::new("p", "cat")
            .with_source("a", b"A".to_vec())
            .with_source("dir/b", b"B".to_vec());
        assert_eq!(compile(&req, &chains).unwrap().artifact.unwrap(), b"BA");
    }

    #[test]
    fn pool_bounds_concurrency() {
        let dir = tempfile::tempdir().unwrap();
        let counter = dir.path().join("log");
        let cmd = format!(
            "echo start >> {c}; sleep 0.2; echo stop >> {c}; cp a {{OUT_FILE}}",
            c = shell_quote(&counter)
        );
        let service = CompileService::new(Toolchains::default().with("any", "slow", &cmd), 2);
        std::thread::scope(|s| {
            for _ in 0..6 {
                s.spawn(|| {
                    let req = CompileRequest::new("p", "slow").with_source("a", b"x".to_vec());
                    assert_eq!(service.compile(&req).unwrap().status, CompileStatus::Ok);
                });
            }
        });
        let mut depth: i32 = 0;
        let mut peak = 0;
        for line in std::fs::read_to_string(&counter).unwrap().lines() {
            depth += if line == "start" { 1 } else { -1 };
            peak = peak.max(depth);
        }
        assert!(peak <= 2, "peak concurrency {peak}");

        let busy = CompileService::new(Toolchains::default().with("any", "slow", &cmd), 1)
            .with_queue_wait(Duration::from_millis(10));
        std::thread::scope(|s| {
            let results: Vec<_> = (0..3)
                .map(|_| {
                    s.spawn(|| {
                        let req = CompileRequest::new("p", "slow").with_source("a", b"x".to_vec());
                        busy.compile(&req).map(|r| r.status)
                    })
                })
                .collect::<Vec<_>>()
                .into_iter()
                .map(|h| h.join().unwrap())
                .collect();
            assert!(results.iter().any(|r| r == &Err(CompileError::Busy)));
            assert!(results.iter().any(|r| r == &Ok(CompileStatus::Ok)));
        });
    }
}
