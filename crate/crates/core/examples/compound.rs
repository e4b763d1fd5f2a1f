//! Package a sub-project as a compound component and use it like any other.
//!
//!     cargo run -p comodi --example compound

use std::collections::BTreeMap;

use comodi::engine::stdlib;
use comodi::model::{NodeSpec, PortRef, Value};
use comodi::wiring::{compose_compound, ChainResolver, CompoundIdentity, Library};
use comodi::{Engine, GlobalName, Project, Version};

fn node(leaf: &str) -> NodeSpec {
    NodeSpec::new(stdlib::name(leaf), stdlib::VERSION)
}

fn main() {
    let engine = Engine::new(stdlib::examples());

    // y = -(x^2), exposing the inner ports a.x and b.y as x and y
    let inner = Project::new("negated square")
        .with_node("a", node("square"))
        .with_node("b", node("neg"))
        .with_edge("a.y", "b.x");
    let promotions: BTreeMap<PortRef, String> = [
        ("a.x".parse().unwrap(), "x".to_string()),
        ("b.y".parse().unwrap(), "y".to_string()),
    ]
    .into();
    let identity = CompoundIdentity::new(GlobalName::new("org.example.negsq").unwrap(), Version::new(1, 0, 0));
    let compound = compose_compound(&inner, &promotions, identity, engine.builtins()).expect("composable");
    println!("{}", comodi::model::serialize_descriptor(&compound));

    let resolver = ChainResolver::new()
        .push(engine.builtins().clone())
        .push(Library::new().with(compound.clone()));
    let outer = Project::new("uses the compound")
        .with_node("k", node("const").with_param("value", Value::Real(3.0)))
        .with_node("c", NodeSpec::new(compound.name.clone(), compound.version))
        .with_node("out", node("capture"))
        .with_edge("k.x", "c.x")
        .with_edge("c.y", "out.x");

    // Compounds are flattened before scheduling; inner nodes appear as c/a and c/b.
    let report = engine.run(&outer, &resolver).unwrap();
    for n in &report.nodes {
        println!("{:<4} {:?}", n.node, n.outputs);
    }
    assert_eq!(report.output("out", "value"), Some(&Value::Real(-9.0)));
}
