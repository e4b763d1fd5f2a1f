//! Wire builtin components into a project, validate it and run it.
//!
//!     cargo run -p comodi --example pipeline

use comodi::engine::stdlib;
use comodi::model::{NodeSpec, Value};
use comodi::wiring::validate_project;
use comodi::{Engine, Project};

fn node(leaf: &str) -> NodeSpec {
    NodeSpec::new(stdlib::name(leaf), stdlib::VERSION)
}

fn main() {
    // fill -> scale_array -> sum_array -> capture
    let project = Project::new("sum of a scaled ramp")
        .with_node("ramp", node("fill").with_param("n", Value::Integer(5)))
        .with_node("scale", node("scale_array").with_param("factor", Value::Real(0.5)))
        .with_node("sum", node("sum_array"))
        .with_node("out", node("capture"))
        .with_edge("ramp.v", "scale.v")
        .with_edge("scale.w", "sum.v")
        .with_edge("sum.s", "out.x");

    let engine = Engine::new(stdlib::examples());
    let violations = validate_project(&project, engine.builtins());
    assert!(violations.is_empty(), "{violations:?}");

    let report = engine.run(&project, engine.builtins()).expect("valid project");
    for n in &report.nodes {
        println!("{:<6} {:?} {:?}", n.node, n.status, n.outputs);
    }
    // 0.5 * (0 + 1 + 2 + 3 + 4)
    assert_eq!(report.output("out", "value"), Some(&Value::Real(5.0)));
    println!("project hash {}", report.project_hash);
}
