//! Host a compile service until interrupted. TOOLCHAINS is a JSON array
//! of `{"platform", "language", "command"}` entries; commands see
//! `{SRC_DIR}` and `{OUT_FILE}`.
//!
//!     cargo run -p comodi --example compile_server -- toolchains.json 127.0.0.1:8782

use std::sync::Arc;

use comodi::buildsvc::{serve, CompileService, Toolchains};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: compile_server TOOLCHAINS.json [ADDR]");
        std::process::exit(1);
    };
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8782".into());
    let toolchains = Toolchains::load(&path).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(1);
    });
    let server = serve(Arc::new(CompileService::new(toolchains, 2)), &addr).expect("bind");
    println!("compile service listening on {}", server.url());
    server.wait();
}
