//! The registry service over loopback HTTP.

use std::sync::Arc;

use comodi::engine::stdlib;
use comodi::model::{DataType, Version};
use comodi::registry::{serve, RegistryClient, RegistryRecord, SearchQuery, Store, VersionSel, COMPILE_SERVERS_FILE};
use comodi::ApiError;

fn record(leaf: &str, version: Version) -> RegistryRecord {
    let mut d = (*stdlib::examples()
        .descriptor(&stdlib::name(leaf), &stdlib::VERSION)
        .unwrap())
    .clone();
    d.version = version;
    RegistryRecord::new(d, format!("https://example.org/{leaf}.tar"), "tests")
}

#[test]
fn publish_search_fetch_download() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(Arc::new(Store::open(dir.path()).unwrap()), "127.0.0.1:0").unwrap();
    let client = RegistryClient::new(server.url());

    let stored = client.register(&record("square", Version::new(1, 0, 0))).unwrap();
    assert_eq!(stored.download_count, 0);
    match client.register(&record("square", Version::new(1, 0, 0))) {
        Err(ApiError::Remote { status: 409, code, .. }) => assert_eq!(code, "DUPLICATE"),
        other => panic!("{other:?}"),
    }
    let mut broken = record("cube", Version::new(1, 0, 0));
    broken.descriptor.tags.clear();
    match client.register(&broken) {
        Err(ApiError::Remote {
            status: 422,
            code,
            detail,
        }) => {
            assert_eq!(code, "INVALID_DESCRIPTOR");
            assert!(detail.contains("tags empty"), "{detail}");
        }
        other => panic!("{other:?}"),
    }
    client.register(&record("square", Version::new(1, 2, 0))).unwrap();
    client.register(&record("greeting", Version::new(1, 0, 0))).unwrap();

    let name = stdlib::name("square");
    assert_eq!(
        client.fetch(&name, &VersionSel::Latest).unwrap().descriptor.version,
        Version::new(1, 2, 0)
    );
    match client.fetch(&stdlib::name("nothing"), &VersionSel::Latest) {
        Err(ApiError::Remote { status: 404, code, .. }) => assert_eq!(code, "NOT_FOUND"),
        other => panic!("{other:?}"),
    }
    assert_eq!(client.record_download(&name, &Version::new(1, 0, 0)).unwrap(), 1);
    assert_eq!(client.record_download(&name, &Version::new(1, 0, 0)).unwrap(), 2);

    let hits = client.search(&SearchQuery::provides(DataType::Real64)).unwrap();
    let ids: Vec<_> = hits.iter().map(RegistryRecord::id).collect();
    assert_eq!(
        ids,
        ["org.comodi.examples.square@1.0.0", "org.comodi.examples.square@1.2.0"]
    );
    let hits = client.search(&SearchQuery::provides(DataType::Text)).unwrap();
    assert_eq!(hits.len(), 1);
    match client.search(&SearchQuery::default()) {
        Err(ApiError::Remote { status: 400, code, .. }) => assert_eq!(code, "INVALID_QUERY"),
        other => panic!("{other:?}"),
    }

    assert!(client.compile_servers().unwrap().is_empty());
    std::fs::write(
        dir.path().join(COMPILE_SERVERS_FILE),
        r#"[{"url":"http://127.0.0.1:9","platforms":["any"],"description":"stub"}]"#,
    )
    .unwrap();
    assert_eq!(client.compile_servers().unwrap()[0].description, "stub");
}

#[test]
fn unreachable_registry_is_a_network_error() {
    let client = RegistryClient::new("http://127.0.0.1:9");
    let err = client.fetch(&stdlib::name("square"), &VersionSel::Latest).unwrap_err();
    assert_eq!(err.code(), "NETWORK");
}

#[test]
fn type_filters_accept_dsl_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(Arc::new(Store::open(dir.path()).unwrap()), "127.0.0.1:0").unwrap();
    let client = RegistryClient::new(server.url());
    for leaf in ["fill", "sum_array", "const"] {
        client.register(&record(leaf, Version::new(1, 0, 0))).unwrap();
    }
    let agent = ureq::agent();
    let get = |q: &str| -> Vec<serde_json::Value> {
        agent
            .get(&format!("{}/v1/components", server.url()))
            .query("uses_type", q)
            .call()
            .unwrap()
            .into_json()
            .unwrap()
    };
    assert_eq!(get("array<real64,1>").len(), 1);
    assert_eq!(get(r#"{"kind":"array","element":{"kind":"real64"},"rank":1}"#).len(), 1);
    let bad = agent
        .get(&format!("{}/v1/components?uses_type=float", server.url()))
        .call()
        .unwrap_err();
    assert!(matches!(bad, ureq::Error::Status(400, _)));
}
