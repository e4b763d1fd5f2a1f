//! The compile service over loopback HTTP.

use std::sync::Arc;

use comodi::buildsvc::{
    compile, remote_compile, serve, CompileClient, CompileRequest, CompileService, CompileStatus, Toolchains,
};
use comodi::registry::CompileServerEntry;
use comodi::ApiError;

fn toolchains() -> Toolchains {
    Toolchains::default()
        .with("any", "concat", "cat {SRC_DIR}/* > {OUT_FILE}")
        .with("any", "broken", "echo 'x.c:1: nope'; exit 1")
}

#[test]
fn loopback_matches_local_compile() {
    let server = serve(Arc::new(CompileService::new(toolchains(), 2)), "127.0.0.1:0").unwrap();
    let entry = CompileServerEntry {
        url: server.url(),
        platforms: vec!["any".into()],
        description: String::new(),
    };
    let binary: Vec<u8> = (0..=255u8).cycle().take(70_000).collect();
    let req = CompileRequest::new("linux-x86_64", "concat")
        .with_source("a.bin", binary)
        .with_source("b.txt", b"tail".to_vec());
    let local = compile(&req, &toolchains()).unwrap();
    let remote = remote_compile(&entry, &req).unwrap();
    assert_eq!(remote.status, CompileStatus::Ok);
    assert_eq!(remote, local);

    let failing = CompileRequest::new("p", "broken").with_source("x.c", b"".to_vec());
    let remote = CompileClient::new(server.url()).compile(&failing).unwrap();
    assert_eq!(remote.status, CompileStatus::Failed);
    assert_eq!(remote.diagnostics.len(), 1);
    assert_eq!(remote, compile(&failing, &toolchains()).unwrap());
}

#[test]
fn server_errors_pass_through() {
    let server = serve(Arc::new(CompileService::new(toolchains(), 1)), "127.0.0.1:0").unwrap();
    let client = CompileClient::new(server.url());
    let req = CompileRequest::new("plan9-mips", "fortran").with_source("a.f", b"".to_vec());
    match client.compile(&req) {
        Err(ApiError::Remote { status: 422, code, .. }) => assert_eq!(code, "UNSUPPORTED_TARGET"),
        other => panic!("{other:?}"),
    }
    let req = CompileRequest::new("any", "concat").with_source("../escape", b"".to_vec());
    match client.compile(&req) {
        Err(ApiError::Remote { status: 422, code, .. }) => assert_eq!(code, "INVALID_REQUEST"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unreachable_server_is_network_error() {
    let req = CompileRequest::new("any", "concat").with_source("a", b"x".to_vec());
    let err = CompileClient::new("http://127.0.0.1:9").compile(&req).unwrap_err();
    assert!(matches!(err, ApiError::Network(_)), "{err:?}");
}
