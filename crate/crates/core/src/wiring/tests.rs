use std::collections::BTreeMap;

use super::*;
use crate::model::{
    ComponentDescriptor, DataType, DocInfo, NodeSpec, ParamSpec, PortRef, PortSpec, Project, Value, Version,
};

fn v1() -> Version {
    Version::new(1, 0, 0)
}

fn named(leaf: &str) -> crate::model::GlobalName {
    format!("org.test.{leaf}").parse().unwrap()
}

fn unary(leaf: &str) -> ComponentDescriptor {
    ComponentDescriptor::elementary(named(leaf), v1())
        .with_port(PortSpec::uses("x", DataType::Real64))
        .with_port(PortSpec::provides("y", DataType::Real64))
}

fn library() -> Library {
    let point = DataType::composite([("x", DataType::Real64), ("y", DataType::Real64)]);
    let xonly = DataType::composite([("x", DataType::Real64)]);
    Library::new()
        .with(
            ComponentDescriptor::elementary(named("konst"), v1())
                .with_param(ParamSpec::new("value", DataType::Real64, None))
                .with_port(PortSpec::provides("x", DataType::Real64)),
        )
        .with(unary("square"))
        .with(unary("cube"))
        .with(
            ComponentDescriptor::elementary(named("sink"), v1())
                .with_port(PortSpec::uses("x", DataType::Real64))
                .with_port(PortSpec::provides("value", DataType::Real64)),
        )
        .with(ComponentDescriptor::elementary(named("text"), v1()).with_port(PortSpec::provides("x", DataType::Text)))
        .with(
            ComponentDescriptor::elementary(named("point"), v1())
                .with_port(PortSpec::uses("x", DataType::Real64))
                .with_port(PortSpec::provides("y", point.clone())),
        )
        .with(
            ComponentDescriptor::elementary(named("pointx"), v1())
                .with_port(PortSpec::uses("x", DataType::Real64))
                .with_port(PortSpec::provides("y", xonly.clone())),
        )
        .with(
            ComponentDescriptor::elementary(named("readx"), v1())
                .with_port(PortSpec::uses("p", xonly))
                .with_port(PortSpec::provides("value", DataType::Real64)),
        )
}

fn node(leaf: &str) -> NodeSpec {
    NodeSpec::new(named(leaf), v1())
}

fn r(s: &str) -> PortRef {
    s.parse().unwrap()
}

fn pipeline() -> Project {
    Project::new("demo")
        .with_node("src", node("konst").with_param("value", Value::Real(2.0)))
        .with_node("sq", node("square"))
        .with_node("out", node("sink"))
        .with_edge("src.x", "sq.x")
        .with_edge("sq.y", "out.x")
}

fn codes(v: &[Violation]) -> Vec<ViolationCode> {
    v.iter().map(|v| v.code).collect()
}

#[test]
fn valid_pipeline() {
    assert_eq!(validate_project(&pipeline(), &library()), []);
}

#[test]
fn unbound_required_uses() {
    let mut p = pipeline();
    p.edges.pop();
    let v = validate_project(&p, &library());
    assert_eq!(codes(&v), [ViolationCode::UnboundRequiredUses]);
    assert_eq!(v[0].path, "out.x");
}

#[test]
fn unknown_component() {
    let p = pipeline().with_node("ghost", NodeSpec::new(named("ghost"), v1()));
    assert_eq!(
        codes(&validate_project(&p, &library())),
        [ViolationCode::UnknownComponent]
    );
}

#[test]
fn param_checks() {
    let lib = library();
    let mut p = pipeline();
    p.nodes
        .get_mut("src")
        .unwrap()
        .params
        .insert("value".into(), Value::text("two"));
    assert_eq!(codes(&validate_project(&p, &lib)), [ViolationCode::ParamType]);
    p.nodes.get_mut("src").unwrap().params.clear();
    assert_eq!(codes(&validate_project(&p, &lib)), [ViolationCode::ParamType]);
    p.nodes
        .get_mut("src")
        .unwrap()
        .params
        .insert("value".into(), Value::Integer(7));
    assert_eq!(validate_project(&p, &lib), []);
}

#[test]
fn validate_reports_type_cycle_dangling_duplicate() {
    let lib = library();
    let p = pipeline()
        .with_node("t", node("text"))
        .with_edge("t.x", "sq.x")
        .with_edge("out.value", "zz.x");
    let v = validate_project(&p, &lib);
    assert_eq!(
        codes(&v),
        [
            ViolationCode::DuplicateBinding,
            ViolationCode::TypeMismatch,
            ViolationCode::DanglingRef
        ]
    );
    let p = Project::default()
        .with_node("a", node("square"))
        .with_node("b", node("square"))
        .with_edge("a.y", "b.x")
        .with_edge("b.y", "a.x");
    assert_eq!(codes(&validate_project(&p, &lib)), [ViolationCode::Cycle]);
}

#[test]
fn connect_rules() {
    let lib = library();
    let base = Project::new("p")
        .with_node("src", node("konst").with_param("value", Value::Real(1.0)))
        .with_node("sq", node("square"));
    let p = connect(&base, &r("src.x"), &r("sq.x"), &lib).unwrap();
    assert_eq!(p.edges.len(), 1);

    let again = connect(&p, &r("src.x"), &r("sq.x"), &lib).unwrap_err();
    assert_eq!(again.code, ViolationCode::DuplicateBinding);

    let looped = base.clone().with_node("sq2", node("square"));
    let looped = connect(&looped, &r("sq.y"), &r("sq2.x"), &lib).unwrap();
    let err = connect(&looped, &r("sq2.y"), &r("sq.x"), &lib).unwrap_err();
    assert_eq!(err.code, ViolationCode::Cycle);

    let with_text = base.clone().with_node("t", node("text"));
    let before = with_text.clone();
    let err = connect(&with_text, &r("t.x"), &r("sq.x"), &lib).unwrap_err();
    assert_eq!(err.code, ViolationCode::TypeMismatch);
    assert_eq!(with_text, before);

    assert_eq!(
        connect(&base, &r("zz.x"), &r("sq.x"), &lib).unwrap_err().code,
        ViolationCode::DanglingRef
    );
    assert_eq!(
        connect(&base, &r("sq.x"), &r("src.x"), &lib).unwrap_err().code,
        ViolationCode::DanglingRef
    );
}

#[test]
fn edits() {
    let lib = library();
    let p = add_node(&Project::default(), "a", node("square"), &lib).unwrap();
    assert_eq!(
        add_node(&p, "a", node("cube"), &lib).unwrap_err().code,
        ViolationCode::DuplicateBinding
    );
    assert_eq!(
        add_node(&p, "g", node("ghost"), &lib).unwrap_err().code,
        ViolationCode::UnknownComponent
    );
    let bad = node("konst").with_param("value", Value::Boolean(true));
    assert_eq!(add_node(&p, "k", bad, &lib).unwrap_err().code, ViolationCode::ParamType);
    let p = remove_node(&pipeline(), "sq").unwrap();
    assert!(p.edges.is_empty());
    let p = disconnect(&pipeline(), &r("out.x")).unwrap();
    assert_eq!(p.edges.len(), 1);
}

#[test]
fn substitution() {
    let lib = library();
    let p = pipeline();
    let own = lib.resolve(&named("square"), &v1()).unwrap();
    assert!(substitutable(&p, "sq", &own, &lib).ok);

    let cube = lib.resolve(&named("cube"), &v1()).unwrap();
    let q = replace_node(&p, "sq", &cube, &lib).unwrap();
    assert_eq!(q.edges, p.edges);
    assert_eq!(q.nodes["sq"].component, named("cube"));
    assert_eq!(validate_project(&q, &lib), []);

    let renamed = ComponentDescriptor::elementary(named("other"), v1())
        .with_port(PortSpec::uses("z", DataType::Real64))
        .with_port(PortSpec::provides("y", DataType::Real64));
    let report = replace_node(&p, "sq", &renamed, &lib).unwrap_err();
    assert!(!report.ok);
    assert!(report
        .ports
        .iter()
        .any(|c| c.port == "x" && c.status == PortStatus::Missing));
    assert!(report.to_string().contains("`x`"));
}

#[test]
fn widened_output_substitutes() {
    let lib = library();
    let p = Project::new("w")
        .with_node("src", node("konst").with_param("value", Value::Real(1.0)))
        .with_node("px", node("pointx"))
        .with_node("rd", node("readx"))
        .with_edge("src.x", "px.x")
        .with_edge("px.y", "rd.p");
    assert_eq!(validate_project(&p, &lib), []);
    let point = lib.resolve(&named("point"), &v1()).unwrap();
    assert!(substitutable(&p, "px", &point, &lib).ok);
    let q = replace_node(&p, "px", &point, &lib).unwrap();
    assert_eq!(validate_project(&q, &lib), []);
}

fn identity(leaf: &str) -> CompoundIdentity {
    CompoundIdentity {
        name: named(leaf),
        version: v1(),
        doc: DocInfo {
            summary: leaf.into(),
            ..Default::default()
        },
        tags: vec!["compound".into()],
    }
}

#[test]
fn compose_single_node() {
    let lib = library();
    let inner = Project::new("inner").with_node("sq", node("square"));
    let promotions: BTreeMap<PortRef, String> = [(r("sq.x"), "x".to_string()), (r("sq.y"), "y".to_string())].into();
    let d = compose_compound(&inner, &promotions, identity("sqc"), &lib).unwrap();
    assert_eq!(d.uses_ports().count(), 1);
    assert_eq!(d.provides_ports().count(), 1);
    assert_eq!(crate::model::validate_descriptor(&d), []);

    let bound = Project::new("b")
        .with_node("src", node("konst").with_param("value", Value::Real(1.0)))
        .with_node("sq", node("square"))
        .with_edge("src.x", "sq.x");
    let err = compose_compound(&bound, &promotions, identity("bad"), &lib).unwrap_err();
    assert_eq!(err, ComposeError::BoundPromotion(r("sq.x")));

    let dup: BTreeMap<PortRef, String> = [(r("sq.x"), "a".to_string()), (r("sq.y"), "a".to_string())].into();
    assert!(matches!(
        compose_compound(&inner, &dup, identity("d"), &lib),
        Err(ComposeError::DuplicateOuterName(_))
    ));
    let dangling: BTreeMap<PortRef, String> = [(r("nope.x"), "x".to_string())].into();
    assert!(matches!(
        compose_compound(&inner, &dangling, identity("d"), &lib),
        Err(ComposeError::DanglingPromotion(_))
    ));
}

#[test]
fn flatten_namespaces_and_rewrites_edges() {
    let mut lib = library();
    let inner = Project::new("inner")
        .with_node("a", node("square"))
        .with_node("b", node("cube"))
        .with_edge("a.y", "b.x");
    let promotions: BTreeMap<PortRef, String> = [(r("a.x"), "x".to_string()), (r("b.y"), "y".to_string())].into();
    let d = compose_compound(&inner, &promotions, identity("sqcube"), &lib).unwrap();
    let flat = flatten_compound(&d, &lib).unwrap();
    assert_eq!(flat.nodes.keys().collect::<Vec<_>>(), ["a", "b"]);
    assert_eq!(flat.edges, inner.edges);
    lib.insert(d);

    let outer = Project::new("outer")
        .with_node("src", node("konst").with_param("value", Value::Real(1.0)))
        .with_node("c", node("sqcube"))
        .with_node("out", node("sink"))
        .with_edge("src.x", "c.x")
        .with_edge("c.y", "out.x");
    assert_eq!(validate_project(&outer, &lib), []);
    let flat = flatten_project(&outer, &lib).unwrap();
    assert_eq!(flat.nodes.keys().collect::<Vec<_>>(), ["c/a", "c/b", "out", "src"]);
    let mut edges: Vec<String> = flat.edges.iter().map(ToString::to_string).collect();
    edges.sort();
    assert_eq!(edges, ["c/a.y -> c/b.x", "c/b.y -> out.x", "src.x -> c/a.x"]);
    assert_eq!(validate_project(&flat, &lib), []);
}

#[test]
fn self_referencing_compound_hits_nesting_guard() {
    let mut lib = library();
    let inner = Project::new("loop").with_node("sq", node("square"));
    let promotions: BTreeMap<PortRef, String> = [(r("sq.x"), "x".to_string()), (r("sq.y"), "y".to_string())].into();
    let mut d = compose_compound(&inner, &promotions, identity("ouro"), &lib).unwrap();
    // point the inner node at the compound itself
    let comp = d.composition.as_mut().unwrap();
    comp.project.nodes.get_mut("sq").unwrap().component = named("ouro");
    lib.insert(d.clone());
    assert!(matches!(
        flatten_compound(&d, &lib),
        Err(FlattenError::NestingTooDeep(_))
    ));
}
