//! Register a native Rust function as a component and call it directly.
//!
//!     cargo run -p comodi --example custom_component

use std::sync::Arc;

use comodi::engine::{stdlib, ComponentError, PortValues};
use comodi::model::{ComponentDescriptor, DataType, PortSpec, Value};
use comodi::{Engine, GlobalName, Version};

fn main() {
    let descriptor =
        ComponentDescriptor::elementary(GlobalName::new("org.example.hypot").unwrap(), Version::new(1, 0, 0))
            .with_summary("Euclidean norm of two reals")
            .with_tags(["math/arith"])
            .with_port(PortSpec::uses("a", DataType::Real64))
            .with_port(PortSpec::uses("b", DataType::Real64))
            .with_port(PortSpec::provides("h", DataType::Real64));

    let mut builtins = stdlib::examples();
    builtins.register(descriptor.clone(), |inputs: &PortValues, _params: &PortValues| {
        let get = |p: &str| inputs[p].as_real().ok_or_else(|| ComponentError::new("BAD_INPUT", p));
        Ok([("h".to_string(), Value::Real(get("a")?.hypot(get("b")?)))].into())
    });

    let engine = Engine::new(builtins);
    let mut instance = engine.instantiate(&Arc::new(descriptor)).unwrap();
    let inputs = [("a".to_string(), Value::Real(3.0)), ("b".to_string(), Value::Real(4.0))].into();
    let out = instance.invoke(&inputs, &PortValues::new()).unwrap();
    println!("hypot(3, 4) = {:?}", out["h"]);

    // A missing input is refused before the function runs.
    let err = instance.invoke(&PortValues::new(), &PortValues::new()).unwrap_err();
    println!("without inputs: {} ({})", err, err.code());
}
