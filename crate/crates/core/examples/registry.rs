//! Run a registry on loopback, publish components, search and fetch.
//!
//!     cargo run -p comodi --example registry

use std::sync::Arc;

use comodi::engine::stdlib;
use comodi::gluegen::parse_type;
use comodi::registry::{serve, RegistryClient, RegistryRecord, SearchQuery, Store, VersionSel};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(Arc::new(Store::open(dir.path()).unwrap()), "127.0.0.1:0").unwrap();
    println!("registry at {}", server.url());
    let client = RegistryClient::new(server.url());

    let lib = stdlib::examples();
    for d in lib.descriptors() {
        let record = RegistryRecord::new(d.clone(), format!("https://example.org/{}.tar", d.name), "examples");
        client.register(&record).unwrap();
    }
    // Publishing the same name and version twice is refused.
    let again = RegistryRecord::new(lib.descriptors().next().unwrap().clone(), "x", "examples");
    println!("republish: {}", client.register(&again).unwrap_err());

    for _ in 0..3 {
        client
            .record_download(&stdlib::name("sum_array"), &stdlib::VERSION)
            .unwrap();
    }

    let query = SearchQuery::uses(parse_type("array<real64,1>").unwrap());
    println!("components accepting a real vector (most downloaded first):");
    for r in client.search(&query).unwrap() {
        println!("  {:<40} {} downloads", r.id(), r.download_count);
    }
    println!("under arrays/:");
    for r in client.search(&SearchQuery::tag("arrays")).unwrap() {
        println!("  {}", r.id());
    }

    let latest = client.fetch(&stdlib::name("cube"), &VersionSel::Latest).unwrap();
    println!("cube: {} at {}", latest.descriptor.version, latest.artifact_url);
}
