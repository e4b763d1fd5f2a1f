//! Host a registry until interrupted. Records persist under DATA_DIR;
//! drop a `compile_servers.json` there to advertise compile services.
//!
//!     cargo run -p comodi --example registry_server -- ./registry-data 127.0.0.1:8781

use std::sync::Arc;

use comodi::registry::{serve, Store};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "registry-data".into());
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8781".into());
    std::fs::create_dir_all(&dir).expect("create data dir");
    let store = Store::open(&dir).expect("open store");
    println!("{} records loaded from {dir}", store.records().len());
    let server = serve(Arc::new(store), &addr).expect("bind");
    println!("registry listening on {}", server.url());
    server.wait();
}
