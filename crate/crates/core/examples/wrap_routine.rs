//! Wrap a plain Python function from its signature and run it as a
//! subprocess component. Needs `python3` on PATH.
//!
//!     cargo run -p comodi --example wrap_routine

use comodi::engine::{stdlib, LocalArtifacts, PortValues};
use comodi::gluegen::{emit_glue, parse_signature};
use comodi::model::{ArrayValue, Value};
use comodi::Engine;

const SIGNATURE: &str = "\
# Weighted mean of a vector.
routine wmean(v: array<real64,1> in, w: real64 in, n: integer64 out) -> real64
";

// Python routines return their out-arguments first, then the result.
const ROUTINE: &str = "\
def wmean(v, w):
    return len(v), w * sum(v) / len(v)
";

fn main() {
    let sig = parse_signature(SIGNATURE).expect("valid signature");
    println!("parsed: {sig}");
    let bundle = emit_glue(&sig, "python").unwrap();

    // The artifact is the user's routine followed by the generated glue.
    let dir = tempfile::tempdir().unwrap();
    let artifact = bundle
        .descriptor_skeleton
        .implementation
        .as_ref()
        .unwrap()
        .artifact
        .clone();
    std::fs::write(dir.path().join(&artifact), format!("{ROUTINE}\n{}", bundle.glue_source)).unwrap();

    let engine = Engine::new(stdlib::examples()).with_artifacts(LocalArtifacts::new([dir.path().to_path_buf()]));
    let descriptor = std::sync::Arc::new(bundle.descriptor_skeleton);
    let mut instance = match engine.instantiate(&descriptor) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("cannot start the component (is python3 installed?): {e}");
            return;
        }
    };
    let inputs: PortValues = [
        (
            "v".to_string(),
            Value::Array(ArrayValue::vector_real(vec![1.0, 2.0, 3.0, 6.0])),
        ),
        ("w".to_string(), Value::Real(2.0)),
    ]
    .into();
    let out = instance.invoke(&inputs, &PortValues::new()).unwrap();
    println!("result = {:?}, n = {:?}", out["result"], out["n"]);
}
