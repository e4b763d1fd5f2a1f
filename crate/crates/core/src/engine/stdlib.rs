//! Example components shipped as builtins under `org.comodi.examples`.
//!
//! Real-valued: `const`, `square`, `cube`, `add`, `sub`, `mul`, `neg`,
//! `scale`, `capture`. Integer: `const_int`, `add_int`, `sub_int`,
//! `mul_int`, `neg_int` (wrapping arithmetic). Arrays: `fill`,
//! `scale_array`, `sum_array`. Text: `greeting`. Stateful: `accumulate`.

use std::sync::Arc;

use super::builtin::BuiltinRegistry;
use super::{Component, ComponentError, PortValues};
use crate::model::{
    ArrayValue, Behavior, ComponentDescriptor, DataType, GlobalName, ParamSpec, PortSpec, Value, Version,
};

pub const NAMESPACE: &str = "org.comodi.examples";
pub const VERSION: Version = Version::new(1, 0, 0);

pub fn name(leaf: &str) -> GlobalName {
    format!("{NAMESPACE}.{leaf}").parse().expect("valid builtin name")
}

fn base(leaf: &str, summary: &str, tag: &str, category: &str) -> ComponentDescriptor {
    let mut d = ComponentDescriptor::elementary(name(leaf), VERSION)
        .with_summary(summary)
        .with_tags([tag]);
    d.representation.category = category.to_string();
    d
}

fn real(inputs: &PortValues, port: &str) -> Result<f64, ComponentError> {
    inputs
        .get(port)
        .and_then(Value::as_real)
        .ok_or_else(|| ComponentError::new("BAD_INPUT", format!("{port} is not real64")))
}

fn int(inputs: &PortValues, port: &str) -> Result<i64, ComponentError> {
    inputs
        .get(port)
        .and_then(Value::as_integer)
        .ok_or_else(|| ComponentError::new("BAD_INPUT", format!("{port} is not integer64")))
}

fn one(port: &str, v: Value) -> PortValues {
    [(port.to_string(), v)].into()
}

fn unary_real(reg: &mut BuiltinRegistry, leaf: &str, summary: &str, f: fn(f64) -> f64) {
    let d = base(leaf, summary, "math/arithmetic", "arithmetic")
        .with_port(PortSpec::uses("x", DataType::Real64))
        .with_port(PortSpec::provides("y", DataType::Real64));
    reg.register(d, move |i, _| Ok(one("y", Value::Real(f(real(i, "x")?)))));
}

fn binary_real(reg: &mut BuiltinRegistry, leaf: &str, summary: &str, f: fn(f64, f64) -> f64) {
    let d = base(leaf, summary, "math/arithmetic", "arithmetic")
        .with_port(PortSpec::uses("a", DataType::Real64))
        .with_port(PortSpec::uses("b", DataType::Real64))
        .with_port(PortSpec::provides("y", DataType::Real64));
    reg.register(d, move |i, _| {
        Ok(one("y", Value::Real(f(real(i, "a")?, real(i, "b")?))))
    });
}

fn unary_int(reg: &mut BuiltinRegistry, leaf: &str, summary: &str, f: fn(i64) -> i64) {
    let d = base(leaf, summary, "math/integer", "arithmetic")
        .with_port(PortSpec::uses("x", DataType::Integer64))
        .with_port(PortSpec::provides("y", DataType::Integer64));
    reg.register(d, move |i, _| Ok(one("y", Value::Integer(f(int(i, "x")?)))));
}

fn binary_int(reg: &mut BuiltinRegistry, leaf: &str, summary: &str, f: fn(i64, i64) -> i64) {
    let d = base(leaf, summary, "math/integer", "arithmetic")
        .with_port(PortSpec::uses("a", DataType::Integer64))
        .with_port(PortSpec::uses("b", DataType::Integer64))
        .with_port(PortSpec::provides("y", DataType::Integer64));
    reg.register(d, move |i, _| {
        Ok(one("y", Value::Integer(f(int(i, "a")?, int(i, "b")?))))
    });
}

/// Running sum over successive invocations of one instance.
struct Accumulate {
    total: f64,
}

impl Component for Accumulate {
    fn invoke(&mut self, inputs: &PortValues, _: &PortValues) -> Result<PortValues, ComponentError> {
        self.total += real(inputs, "x")?;
        Ok(one("total", Value::Real(self.total)))
    }
}

pub fn register_examples(reg: &mut BuiltinRegistry) {
    let konst = base("const", "emits a configured real number", "math/constants", "source")
        .with_param(ParamSpec::new("value", DataType::Real64, Some(Value::Real(0.0))))
        .with_port(PortSpec::provides("x", DataType::Real64));
    reg.register(konst, |_, p| Ok(one("x", Value::Real(real(p, "value")?))));

    let konst_int = base("const_int", "emits a configured integer", "math/constants", "source")
        .with_param(ParamSpec::new("value", DataType::Integer64, Some(Value::Integer(0))))
        .with_port(PortSpec::provides("x", DataType::Integer64));
    reg.register(konst_int, |_, p| Ok(one("x", Value::Integer(int(p, "value")?))));

    unary_real(reg, "square", "x squared", |x| x * x);
    unary_real(reg, "cube", "x cubed", |x| x * x * x);
    unary_real(reg, "neg", "negation", |x| -x);
    binary_real(reg, "add", "a + b", |a, b| a + b);
    binary_real(reg, "sub", "a - b", |a, b| a - b);
    binary_real(reg, "mul", "a * b", |a, b| a * b);
    unary_int(reg, "neg_int", "wrapping integer negation", i64::wrapping_neg);
    binary_int(reg, "add_int", "wrapping integer a + b", i64::wrapping_add);
    binary_int(reg, "sub_int", "wrapping integer a - b", i64::wrapping_sub);
    binary_int(reg, "mul_int", "wrapping integer a * b", i64::wrapping_mul);

    let scale = base("scale", "x times a configured factor", "math/arithmetic", "arithmetic")
        .with_param(ParamSpec::new("factor", DataType::Real64, Some(Value::Real(1.0))))
        .with_port(PortSpec::uses("x", DataType::Real64))
        .with_port(PortSpec::provides("y", DataType::Real64));
    reg.register(scale, |i, p| {
        Ok(one("y", Value::Real(real(i, "x")? * real(p, "factor")?)))
    });

    let capture = base("capture", "records its input in the run report", "io/sinks", "sink")
        .with_port(PortSpec::uses("x", DataType::Real64))
        .with_port(PortSpec::provides("value", DataType::Real64));
    reg.register(capture, |i, _| Ok(one("value", Value::Real(real(i, "x")?))));

    let vector = DataType::array(DataType::Real64, 1);
    let fill = base(
        "fill",
        "start, start+step, ... (n values)",
        "arrays/generators",
        "source",
    )
    .with_param(ParamSpec::new("n", DataType::Integer64, None))
    .with_param(ParamSpec::new("start", DataType::Real64, Some(Value::Real(0.0))))
    .with_param(ParamSpec::new("step", DataType::Real64, Some(Value::Real(1.0))))
    .with_port(PortSpec::provides("v", vector.clone()));
    reg.register(fill, |_, p| {
        let n = int(p, "n")?;
        if n < 0 {
            return Err(ComponentError::new("BAD_PARAM", "n must be non-negative"));
        }
        let (start, step) = (real(p, "start")?, real(p, "step")?);
        let data: Arc<[f64]> = (0..n).map(|k| start + step * k as f64).collect();
        Ok(one("v", Value::Array(ArrayValue::vector_real(data))))
    });

    let scale_array = base(
        "scale_array",
        "element-wise product with a factor",
        "arrays/arithmetic",
        "arithmetic",
    )
    .with_param(ParamSpec::new("factor", DataType::Real64, Some(Value::Real(1.0))))
    .with_port(PortSpec::uses("v", vector.clone()))
    .with_port(PortSpec::provides("w", vector.clone()));
    reg.register(scale_array, |i, p| {
        let factor = real(p, "factor")?;
        let v = i
            .get("v")
            .and_then(Value::as_array)
            .and_then(ArrayValue::as_real)
            .ok_or_else(|| ComponentError::new("BAD_INPUT", "v is not a real vector"))?;
        let data: Arc<[f64]> = v.iter().map(|x| x * factor).collect();
        Ok(one("w", Value::Array(ArrayValue::vector_real(data))))
    });

    let sum = base("sum_array", "sum of all elements", "arrays/reductions", "arithmetic")
        .with_port(PortSpec::uses("v", vector))
        .with_port(PortSpec::provides("s", DataType::Real64));
    reg.register(sum, |i, _| {
        let v = i
            .get("v")
            .and_then(Value::as_array)
            .and_then(ArrayValue::as_real)
            .ok_or_else(|| ComponentError::new("BAD_INPUT", "v is not a real vector"))?;
        Ok(one("s", Value::Real(v.iter().sum())))
    });

    let greeting = base("greeting", "emits a greeting text", "text/generators", "source")
        .with_param(ParamSpec::new("who", DataType::Text, Some(Value::text("world"))))
        .with_port(PortSpec::provides("message", DataType::Text));
    reg.register(greeting, |_, p| {
        let who = p.get("who").and_then(Value::as_text).unwrap_or("world");
        Ok(one("message", Value::text(format!("hello, {who}"))))
    });

    let accumulate = base(
        "accumulate",
        "running sum across invocations",
        "math/stateful",
        "arithmetic",
    )
    .with_behavior(Behavior {
        deterministic: false,
        stateful: true,
    })
    .with_port(PortSpec::uses("x", DataType::Real64))
    .with_port(PortSpec::provides("total", DataType::Real64));
    reg.register_factory(accumulate, || Box::new(Accumulate { total: 0.0 }));
}

/// A registry holding only the example components.
pub fn examples() -> BuiltinRegistry {
    let mut reg = BuiltinRegistry::new();
    register_examples(&mut reg);
    reg
}
