//! Run a compile service with a C toolchain and build a tiny program
//! remotely. Needs `cc` on PATH.
//!
//!     cargo run -p comodi --example compile_service

use std::sync::Arc;

use comodi::buildsvc::{serve, CompileClient, CompileRequest, CompileService, CompileStatus, Toolchains};
use comodi::engine::current_platform;

fn main() {
    let toolchains = Toolchains::default().with("any", "c", "cc -O2 -o {OUT_FILE} {SRC_DIR}/*.c");
    let server = serve(Arc::new(CompileService::new(toolchains, 2)), "127.0.0.1:0").unwrap();
    let client = CompileClient::new(server.url());

    let good = CompileRequest::new(current_platform(), "c").with_source(
        "main.c",
        b"#include <stdio.h>\nint main(void) { puts(\"hi\"); return 0; }\n".to_vec(),
    );
    let result = client.compile(&good).unwrap();
    match (&result.status, &result.artifact) {
        (CompileStatus::Ok, Some(bytes)) => println!("built {} bytes", bytes.len()),
        _ => println!("build failed:\n{}", result.log),
    }

    let bad =
        CompileRequest::new(current_platform(), "c").with_source("main.c", b"int main(void) { return x; }\n".to_vec());
    let result = client.compile(&bad).unwrap();
    println!("status {:?}", result.status);
    for d in &result.diagnostics {
        println!("  {}:{} {}", d.file, d.line, d.message);
    }

    let unsupported = CompileRequest::new(current_platform(), "fortran").with_source("a.f90", b"end\n".to_vec());
    println!("fortran: {}", client.compile(&unsupported).unwrap_err());
}
