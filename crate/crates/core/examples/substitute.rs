//! Ask which components could replace a node, then swap one in.
//!
//!     cargo run -p comodi --example substitute

use comodi::engine::stdlib;
use comodi::model::{NodeSpec, Value};
use comodi::wiring::{replace_node, substitutable, Resolver};
use comodi::{Engine, Project};

fn node(leaf: &str) -> NodeSpec {
    NodeSpec::new(stdlib::name(leaf), stdlib::VERSION)
}

fn main() {
    let engine = Engine::new(stdlib::examples());
    let lib = engine.builtins();
    let project = Project::new("swap")
        .with_node("k", node("const").with_param("value", Value::Real(2.0)))
        .with_node("f", node("square"))
        .with_node("out", node("capture"))
        .with_edge("k.x", "f.x")
        .with_edge("f.y", "out.x");

    for candidate in lib.catalog() {
        let report = substitutable(&project, "f", &candidate, lib);
        println!("{report}");
    }

    let cube = lib.resolve(&stdlib::name("cube"), &stdlib::VERSION).unwrap();
    let swapped = replace_node(&project, "f", &cube, lib).expect("cube fits");
    assert_eq!(swapped.edges, project.edges);
    let report = engine.run(&swapped, lib).unwrap();
    println!("after replacing square with cube: {:?}", report.output("out", "value"));

    let text = lib.resolve(&stdlib::name("greeting"), &stdlib::VERSION).unwrap();
    let refused = replace_node(&project, "f", &text, lib).unwrap_err();
    println!("refused: {refused}");
}
