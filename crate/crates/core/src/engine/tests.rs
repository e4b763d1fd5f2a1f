use std::path::Path;
use std::sync::{Arc, Mutex};

use super::*;
use crate::model::{
    ArrayValue, Behavior, ComponentDescriptor, DataType, GlobalName, Implementation, NodeSpec, PortSpec, Project,
    Version,
};
use crate::wiring::{ChainResolver, Library};

fn node(leaf: &str) -> NodeSpec {
    NodeSpec::new(stdlib::name(leaf), stdlib::VERSION)
}

fn engine() -> Engine {
    Engine::new(stdlib::examples())
}

fn instance(leaf: &str) -> ComponentInstance {
    let e = engine();
    let d = e.builtins().descriptor(&stdlib::name(leaf), &stdlib::VERSION).unwrap();
    e.instantiate(&d).unwrap()
}

fn inputs(pairs: &[(&str, Value)]) -> PortValues {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

#[test]
fn builtin_square_and_const() {
    let mut sq = instance("square");
    let out = sq
        .invoke(&inputs(&[("x", Value::Real(2.0))]), &PortValues::new())
        .unwrap();
    assert_eq!(out["y"], Value::Real(4.0));

    let mut k = instance("const");
    let out = k
        .invoke(&PortValues::new(), &inputs(&[("value", Value::Integer(7))]))
        .unwrap();
    assert_eq!(out["x"], Value::Real(7.0));
}

#[test]
fn invoke_checks_preconditions() {
    let mut sq = instance("square");
    let err = sq.invoke(&PortValues::new(), &PortValues::new()).unwrap_err();
    assert_eq!(err, EngineError::InputMissing("x".into()));
    let err = sq
        .invoke(&inputs(&[("x", Value::text("two"))]), &PortValues::new())
        .unwrap_err();
    assert_eq!(err.code(), "INPUT_PRECONDITION");
    let mut fill = instance("fill");
    let err = fill.invoke(&PortValues::new(), &PortValues::new()).unwrap_err();
    assert!(matches!(err, EngineError::ParamType { ref name, .. } if name == "n"));
    sq.close();
    assert_eq!(sq.state(), InstanceState::Closed);
    assert_eq!(
        sq.invoke(&inputs(&[("x", Value::Real(1.0))]), &PortValues::new()),
        Err(EngineError::Closed)
    );
}

#[test]
fn runs_a_linear_pipeline() {
    let e = engine();
    let p = Project::new("t")
        .with_node("src", node("const").with_param("value", Value::Real(2.0)))
        .with_node("sq", node("square"))
        .with_node("out", node("capture"))
        .with_edge("src.x", "sq.x")
        .with_edge("sq.y", "out.x");
    let report = e.run(&p, e.builtins()).unwrap();
    assert!(report.succeeded());
    assert_eq!(report.output("out", "value"), Some(&Value::Real(4.0)));
    assert_eq!(report.totals.node_count, 3);
    assert_eq!(report.project_hash.len(), 64);
    let order: Vec<_> = report.nodes.iter().map(|n| n.node.as_str()).collect();
    assert_eq!(order, ["src", "sq", "out"]);
    for n in &report.nodes {
        assert!(n.start_ns <= n.stop_ns);
    }
}

#[test]
fn invalid_project_is_rejected_before_running() {
    let e = engine();
    let p = Project::new("t").with_node("sq", node("square"));
    match e.run(&p, e.builtins()) {
        Err(EngineError::InvalidProject(v)) => assert_eq!(v[0].code.as_str(), "UNBOUND_REQUIRED_USES"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn failure_skips_downstream_only() {
    let e = engine().parallel(true);
    let p = Project::new("t")
        .with_node("bad", node("fill").with_param("n", Value::Integer(-1)))
        .with_node("sum", node("sum_array"))
        .with_node("ok", node("const"))
        .with_node("sq", node("square"))
        .with_edge("bad.v", "sum.v")
        .with_edge("ok.x", "sq.x");
    let report = e.run(&p, e.builtins()).unwrap();
    assert_eq!(report.node("bad").unwrap().status, NodeStatus::Error);
    assert_eq!(report.node("bad").unwrap().error.as_ref().unwrap().code, "BAD_PARAM");
    assert_eq!(report.node("sum").unwrap().status, NodeStatus::Skipped);
    assert_eq!(report.node("sq").unwrap().status, NodeStatus::Ok);
    assert_eq!(
        (report.totals.ok, report.totals.failed, report.totals.skipped),
        (2, 1, 1)
    );
}

#[test]
fn fan_out_shares_one_value() {
    let mut reg = stdlib::examples();
    let seen: Arc<Mutex<Vec<Arc<[f64]>>>> = Arc::default();
    let probe = ComponentDescriptor::elementary(stdlib::name("probe"), stdlib::VERSION)
        .with_port(PortSpec::uses("v", DataType::array(DataType::Real64, 1)))
        .with_port(PortSpec::provides("n", DataType::Integer64));
    let sink = Arc::clone(&seen);
    reg.register(probe, move |i, _| {
        let data = i["v"].as_array().and_then(ArrayValue::as_real).unwrap().clone();
        let n = data.len() as i64;
        sink.lock().unwrap().push(data);
        Ok(inputs(&[("n", Value::Integer(n))]))
    });
    let e = Engine::new(reg);
    let p = Project::new("t")
        .with_node("src", node("fill").with_param("n", Value::Integer(1000)))
        .with_node("a", node("probe"))
        .with_node("b", node("probe"))
        .with_edge("src.v", "a.v")
        .with_edge("src.v", "b.v");
    let report = e.run(&p, e.builtins()).unwrap();
    assert!(report.succeeded());
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert!(Arc::ptr_eq(&seen[0], &seen[1]));
    let produced = report
        .output("src", "v")
        .unwrap()
        .as_array()
        .unwrap()
        .as_real()
        .unwrap();
    assert!(Arc::ptr_eq(produced, &seen[0]));
}

#[test]
fn stateful_instance_keeps_state() {
    let mut acc = instance("accumulate");
    for x in [1.0, 2.0, 3.5] {
        acc.invoke(&inputs(&[("x", Value::Real(x))]), &PortValues::new())
            .unwrap();
    }
    let out = acc
        .invoke(&inputs(&[("x", Value::Real(0.5))]), &PortValues::new())
        .unwrap();
    assert_eq!(out["total"], Value::Real(7.0));
}

#[test]
fn compound_nodes_are_flattened_before_running() {
    use crate::wiring::{compose_compound, CompoundIdentity};
    let e = engine();
    let inner = Project::new("inner")
        .with_node("a", node("square"))
        .with_node("b", node("neg"))
        .with_edge("a.y", "b.x");
    let promotions = [("a.x", "x"), ("b.y", "y")]
        .into_iter()
        .map(|(k, v)| (k.parse().unwrap(), v.to_string()))
        .collect();
    let identity = CompoundIdentity::new(GlobalName::new("org.test.negsq").unwrap(), Version::new(1, 0, 0));
    let compound = compose_compound(&inner, &promotions, identity, e.builtins()).unwrap();
    let lib = Library::new().with(compound.clone());
    let resolver = ChainResolver::new().push(e.builtins().clone()).push(lib);
    let p = Project::new("outer")
        .with_node("k", node("const").with_param("value", Value::Real(3.0)))
        .with_node("c", NodeSpec::new(compound.name.clone(), compound.version))
        .with_edge("k.x", "c.x");
    let report = e.run(&p, &resolver).unwrap();
    assert_eq!(report.output("c/b", "y"), Some(&Value::Real(-9.0)));
}

fn external(name: &str, version: Version, backend: Backend, artifact: &str, entry: &str) -> Arc<ComponentDescriptor> {
    let imp = Implementation {
        backend,
        artifact: artifact.into(),
        entry: entry.into(),
        platforms: vec![current_platform()],
    };
    Arc::new(
        ComponentDescriptor::elementary(GlobalName::new(name).unwrap(), version)
            .with_port(PortSpec::uses("x", DataType::Real64))
            .with_port(PortSpec::provides("y", DataType::Real64))
            .with_implementation(imp),
    )
}

const TWICE: &str = r#"echo '{"msg":"hello","protocol":1,"component":"org.test.twice","version":"1.0.1"}'
while read -r line; do
  case "$line" in
    *'"close"'*) exit 0 ;;
    *) x=$(printf '%s' "$line" | sed 's/.*"x":\([-0-9.eE+]*\).*/\1/')
       echo "{\"msg\":\"result\",\"outputs\":{\"y\":$(awk "BEGIN{print 2*$x}")}}" ;;
  esac
done
"#;

fn subprocess_engine(dir: &Path) -> Engine {
    std::fs::write(dir.join("twice.sh"), TWICE).unwrap();
    engine().with_artifacts(LocalArtifacts::new([dir.to_path_buf()]))
}

#[test]
fn subprocess_handshake_and_invoke() {
    let dir = tempfile::tempdir().unwrap();
    let e = subprocess_engine(dir.path());
    let d = external(
        "org.test.twice",
        Version::new(1, 0, 1),
        Backend::Subprocess,
        "twice.sh",
        "sh {artifact}",
    );
    let mut inst = e.instantiate(&d).unwrap();
    for x in [1.5, -4.0] {
        let out = inst
            .invoke(&inputs(&[("x", Value::Real(x))]), &PortValues::new())
            .unwrap();
        assert_eq!(out["y"], Value::Real(2.0 * x));
    }
    inst.close();

    let wrong = external(
        "org.test.twice",
        Version::new(2, 0, 0),
        Backend::Subprocess,
        "twice.sh",
        "sh {artifact}",
    );
    let err = e.instantiate(&wrong).unwrap_err();
    assert_eq!(err.code(), "HANDSHAKE_MISMATCH");
}

#[test]
fn stateful_subprocess_receives_close() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("closed");
    let script = format!(
        r#"echo '{{"msg":"hello","protocol":1,"component":"org.test.keep","version":"1.0.0"}}'
n=0
while read -r line; do
  case "$line" in
    *'"close"'*) echo "$n" > '{}'; exit 0 ;;
    *) n=$((n+1)); echo "{{\"msg\":\"result\",\"outputs\":{{\"y\":$n}}}}" ;;
  esac
done
"#,
        marker.display()
    );
    std::fs::write(dir.path().join("keep.sh"), script).unwrap();
    let e = engine().with_artifacts(LocalArtifacts::new([dir.path().to_path_buf()]));
    let mut d = (*external(
        "org.test.keep",
        Version::new(1, 0, 0),
        Backend::Subprocess,
        "keep.sh",
        "sh {artifact}",
    ))
    .clone();
    d.behavior = Behavior {
        deterministic: false,
        stateful: true,
    };
    let mut inst = e.instantiate(&Arc::new(d)).unwrap();
    for expect in [1.0, 2.0, 3.0] {
        let out = inst
            .invoke(&inputs(&[("x", Value::Real(0.0))]), &PortValues::new())
            .unwrap();
        assert_eq!(out["y"], Value::Real(expect));
    }
    inst.close();
    assert_eq!(std::fs::read_to_string(&marker).unwrap().trim(), "3");
}

#[test]
fn subprocess_error_message_becomes_node_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("fail.sh"),
        r#"echo '{"msg":"hello","protocol":1,"component":"org.test.fail","version":"1.0.0"}'
read -r line
echo '{"msg":"error","code":"DOMAIN","detail":"x out of range"}'
"#,
    )
    .unwrap();
    let e = engine().with_artifacts(LocalArtifacts::new([dir.path().to_path_buf()]));
    let d = external(
        "org.test.fail",
        Version::new(1, 0, 0),
        Backend::Subprocess,
        "fail.sh",
        "sh {artifact}",
    );
    let mut inst = e.instantiate(&d).unwrap();
    let err = inst
        .invoke(&inputs(&[("x", Value::Real(1.0))]), &PortValues::new())
        .unwrap_err();
    assert_eq!(
        err,
        EngineError::Component(ComponentError::new("DOMAIN", "x out of range"))
    );
}

#[test]
fn excluded_platform_is_artifact_missing() {
    let e = engine();
    let mut d = (*external(
        "org.test.twice",
        Version::new(1, 0, 1),
        Backend::Subprocess,
        "twice.sh",
        "",
    ))
    .clone();
    d.implementation.as_mut().unwrap().platforms = vec!["plan9-mips".into()];
    let err = e.instantiate(&Arc::new(d)).unwrap_err();
    assert_eq!(err.code(), "ARTIFACT_MISSING");

    let missing = external(
        "org.test.none",
        Version::new(1, 0, 0),
        Backend::Subprocess,
        "absent.sh",
        "",
    );
    assert_eq!(e.instantiate(&missing).unwrap_err().code(), "ARTIFACT_MISSING");
}

const PLUGIN_C: &str = r#"
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

const char *comodi_hello(void) {
    return "{\"msg\":\"hello\",\"protocol\":1,\"component\":\"org.test.half\",\"version\":\"1.0.0\"}";
}

char *half(const char *msg) {
    const char *p = strstr(msg, "\"x\":");
    double x = p ? strtod(p + 4, NULL) : 0.0;
    char *out = malloc(128);
    snprintf(out, 128, "{\"msg\":\"result\",\"outputs\":{\"y\":%.17g}}", x / 2.0);
    return out;
}

void comodi_free(char *p) { free(p); }
"#;

#[test]
fn plugin_backend_when_a_c_compiler_exists() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("half.c");
    let lib = dir.path().join("libhalf.so");
    std::fs::write(&src, PLUGIN_C).unwrap();
    let built = std::process::Command::new("cc")
        .args(["-shared", "-fPIC", "-o"])
        .arg(&lib)
        .arg(&src)
        .status();
    if !matches!(built, Ok(s) if s.success()) {
        eprintln!("cc unavailable; plugin backend not exercised");
        return;
    }
    let e = engine().with_artifacts(LocalArtifacts::new([dir.path().to_path_buf()]));
    let d = external(
        "org.test.half",
        Version::new(1, 0, 0),
        Backend::Plugin,
        "libhalf.so",
        "half",
    );
    let mut inst = e.instantiate(&d).unwrap();
    let out = inst
        .invoke(&inputs(&[("x", Value::Real(5.0))]), &PortValues::new())
        .unwrap();
    assert_eq!(out["y"], Value::Real(2.5));

    let bad = external(
        "org.test.half",
        Version::new(1, 0, 0),
        Backend::Plugin,
        "libhalf.so",
        "quarter",
    );
    assert_eq!(e.instantiate(&bad).unwrap_err().code(), "ENTRY_SYMBOL_ABSENT");
}
