//! Wrapping plain routines as components.
//!
//! A routine is declared in a small signature language:
//!
//! ```text
//! # Adds two numbers.
//! routine add(a: real64 in, b: real64 in) -> real64
//! ```
//!
//! From the declaration we derive ports (in-arguments become required uses
//! ports, out-arguments and the result become provides ports) and emit a
//! standalone glue program that speaks the subprocess protocol and calls
//! the routine, plus a descriptor skeleton. The routine's own source is
//! never read. Templates are text files under `templates/`; the generator
//! only fills in the routine-specific fragments.

mod parse;

use std::fmt;

use thiserror::Error;

use crate::model::{
    Backend, Behavior, ComponentDescriptor, ComponentKind, DataType, DocInfo, GlobalName, Implementation, PortSpec,
    Representation, Version,
};

pub use parse::{parse_signature, parse_type};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub name: String,
    pub datatype: DataType,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureDecl {
    pub routine: String,
    pub args: Vec<Arg>,
    pub result: Option<DataType>,
    /// Comment lines preceding the declaration.
    pub doc: String,
}

impl fmt::Display for SignatureDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "routine {}(", self.routine)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let mode = if a.mode == Mode::In { "in" } else { "out" };
            write!(f, "{}: {} {mode}", a.name, a.datatype)?;
        }
        f.write_str(")")?;
        if let Some(r) = &self.result {
            write!(f, " -> {r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SigError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: duplicate argument `{name}`")]
    DuplicateArg { line: usize, column: usize, name: String },
    #[error("{line}:{column}: unknown type `{name}`")]
    UnknownType { line: usize, column: usize, name: String },
    #[error("{line}:{column}: {reason}")]
    InvalidType { line: usize, column: usize, reason: String },
    #[error("routine `{0}` has no arguments and no result")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlueError {
    #[error("out-argument `result` collides with the routine result")]
    ResultCollision,
    #[error("unknown template `{0}` (available: {})", TEMPLATES.join(", "))]
    UnknownTemplate(String),
    #[error("template `{template}` cannot pass `{arg}` of type {datatype}")]
    UnsupportedType {
        template: String,
        arg: String,
        datatype: String,
    },
}

/// Template ids accepted by [`emit_glue`].
pub const TEMPLATES: &[&str] = &["c", "python"];

pub const PLACEHOLDER_VERSION: Version = Version::new(0, 1, 0);

/// Ports in declaration order, then `result`.
pub fn derive_ports(sig: &SignatureDecl) -> Result<Vec<PortSpec>, GlueError> {
    if sig.result.is_some() && sig.args.iter().any(|a| a.mode == Mode::Out && a.name == "result") {
        return Err(GlueError::ResultCollision);
    }
    let mut ports: Vec<PortSpec> = sig
        .args
        .iter()
        .map(|a| match a.mode {
            Mode::In => PortSpec::uses(a.name.clone(), a.datatype.clone()),
            Mode::Out => PortSpec::provides(a.name.clone(), a.datatype.clone()),
        })
        .collect();
    if let Some(result) = &sig.result {
        ports.push(PortSpec::provides("result", result.clone()));
    }
    Ok(ports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Command the engine runs; `{artifact}` is the compiled artifact.
    pub entry: String,
    pub routine: String,
    pub ports: Vec<PortSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlueBundle {
    pub template: String,
    /// Suggested file name for `glue_source`.
    pub glue_file: String,
    pub glue_source: String,
    pub descriptor_skeleton: ComponentDescriptor,
    pub entry_manifest: Vec<ManifestEntry>,
}

/// `local.<routine>` at version 0.1.0.
pub fn placeholder_name(routine: &str) -> GlobalName {
    let mut leaf: String = routine
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if !leaf.starts_with(|c: char| c.is_ascii_lowercase()) {
        leaf.insert(0, 'r');
    }
    GlobalName::new(format!("local.{leaf}")).expect("sanitized leaf is a valid segment")
}

/// Emits glue under the placeholder identity.
pub fn emit_glue(sig: &SignatureDecl, template: &str) -> Result<GlueBundle, GlueError> {
    emit_glue_as(sig, template, &placeholder_name(&sig.routine), &PLACEHOLDER_VERSION)
}

/// Emits glue whose handshake announces `name@version`.
pub fn emit_glue_as(
    sig: &SignatureDecl,
    template: &str,
    name: &GlobalName,
    version: &Version,
) -> Result<GlueBundle, GlueError> {
    let ports = derive_ports(sig)?;
    let (glue_file, glue_source, implementation) = match template {
        "python" => (
            format!("{}_glue.py", sig.routine),
            python(sig, name, version),
            Implementation {
                backend: Backend::Subprocess,
                artifact: format!("{}_component.py", sig.routine),
                entry: "python3 {artifact}".into(),
                platforms: vec!["any".into()],
            },
        ),
        "c" => (
            format!("{}_glue.c", sig.routine),
            c(sig, name, version)?,
            Implementation {
                backend: Backend::Subprocess,
                artifact: format!("{}_component", sig.routine),
                entry: "{artifact}".into(),
                platforms: vec![crate::engine::current_platform()],
            },
        ),
        other => return Err(GlueError::UnknownTemplate(other.to_string())),
    };
    let (summary, description) = match sig.doc.split_once('\n') {
        _ if sig.doc.is_empty() => (format!("Wraps routine `{}`", sig.routine), String::new()),
        Some((first, rest)) => (first.to_string(), rest.trim().to_string()),
        None => (sig.doc.clone(), String::new()),
    };
    let entry_manifest = vec![ManifestEntry {
        entry: implementation.entry.clone(),
        routine: sig.routine.clone(),
        ports: ports.clone(),
    }];
    let descriptor_skeleton = ComponentDescriptor {
        name: name.clone(),
        version: *version,
        kind: ComponentKind::Elementary,
        doc: DocInfo {
            summary,
            description,
            authors: Vec::new(),
        },
        tags: vec!["wrapped".into()],
        ports,
        params: Vec::new(),
        behavior: Behavior::default(),
        representation: Representation {
            label: sig.routine.clone(),
            category: "wrapped".into(),
        },
        implementation: Some(implementation),
        composition: None,
    };
    Ok(GlueBundle {
        template: template.to_string(),
        glue_file,
        glue_source,
        descriptor_skeleton,
        entry_manifest,
    })
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn python(sig: &SignatureDecl, name: &GlobalName, version: &Version) -> String {
    let pair = |n: &str, t: &DataType| serde_json::json!([n, t]);
    let inputs: Vec<_> = sig
        .args
        .iter()
        .filter(|a| a.mode == Mode::In)
        .map(|a| pair(&a.name, &a.datatype))
        .collect();
    let mut outputs: Vec<_> = sig
        .args
        .iter()
        .filter(|a| a.mode == Mode::Out)
        .map(|a| pair(&a.name, &a.datatype))
        .collect();
    if let Some(r) = &sig.result {
        outputs.push(pair("result", r));
    }
    let spec = serde_json::json!({ "inputs": inputs, "outputs": outputs }).to_string();
    include_str!("templates/python.py.in")
        .replace("@ROUTINE@", &sig.routine)
        .replace("@COMPONENT@", &json_string(name.as_str()))
        .replace("@VERSION@", &json_string(&version.to_string()))
        .replace("@ROUTINE_NAME@", &json_string(&sig.routine))
        .replace("@SPEC@", &json_string(&spec))
}

/// C spelling and reader macro suffix of a scalar type.
fn c_scalar(ty: &DataType) -> Option<(&'static str, &'static str)> {
    match ty {
        DataType::Integer64 => Some(("int64_t", "integer")),
        DataType::Real64 => Some(("double", "real")),
        DataType::Boolean => Some(("int", "boolean")),
        _ => None,
    }
}

fn c(sig: &SignatureDecl, name: &GlobalName, version: &Version) -> Result<String, GlueError> {
    let unsupported = |arg: &str, ty: &DataType| GlueError::UnsupportedType {
        template: "c".into(),
        arg: arg.to_string(),
        datatype: ty.to_string(),
    };
    let mut params = Vec::new();
    let mut decls = Vec::new();
    let mut call_args = Vec::new();
    let mut emit = Vec::new();
    let mut cleanup = Vec::new();
    for a in &sig.args {
        let var = format!("arg_{}", a.name);
        match (a.mode, &a.datatype) {
            (Mode::In, DataType::Array { element, rank: 1, .. }) => {
                let (ctype, kind) = c_scalar(element).ok_or_else(|| unsupported(&a.name, &a.datatype))?;
                params.push(format!("const {ctype} *{var}, int64_t {var}_len"));
                decls.push(format!(
                    "    {ctype} *{var};\n    int64_t {var}_len;\n    INPUT_VECTOR({kind}, {ctype}, \"{}\", {var})",
                    a.name
                ));
                call_args.push(format!("{var}, {var}_len"));
                cleanup.push(format!("    free({var});"));
            }
            (Mode::In, ty) => {
                let (ctype, kind) = c_scalar(ty).ok_or_else(|| unsupported(&a.name, ty))?;
                params.push(format!("{ctype} {var}"));
                decls.push(format!(
                    "    {ctype} {var};\n    INPUT_SCALAR({kind}, \"{}\", {var})",
                    a.name
                ));
                call_args.push(var);
            }
            (Mode::Out, ty) => {
                let (ctype, kind) = c_scalar(ty).ok_or_else(|| unsupported(&a.name, ty))?;
                params.push(format!("{ctype} *{var}"));
                decls.push(format!("    {ctype} {var} = 0;"));
                call_args.push(format!("&{var}"));
                emit.push((a.name.clone(), kind, var));
            }
        }
    }
    let ret = match &sig.result {
        Some(ty) => {
            let (ctype, kind) = c_scalar(ty).ok_or_else(|| unsupported("result", ty))?;
            emit.push(("result".into(), kind, "result_".into()));
            Some(ctype)
        }
        None => None,
    };
    let params = if params.is_empty() {
        "void".to_string()
    } else {
        params.join(", ")
    };
    let prototype = format!("{} {}({params});", ret.unwrap_or("void"), sig.routine);
    let call = match ret {
        Some(ctype) => format!("    {ctype} result_ = {}({});", sig.routine, call_args.join(", ")),
        None => format!("    {}({});", sig.routine, call_args.join(", ")),
    };
    let emit = emit
        .iter()
        .enumerate()
        .map(|(i, (port, kind, var))| {
            let sep = if i == 0 { "" } else { "," };
            format!("    fputs(\"{sep}\\\"{port}\\\":\", stdout);\n    emit_{kind}({var});")
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(include_str!("templates/c.c.in")
        .replace("@ROUTINE@", &sig.routine)
        .replace("@PROTOTYPE@", &prototype)
        .replace("@COMPONENT@", name.as_str())
        .replace("@VERSION@", &version.to_string())
        .replace("@DECLS@", &decls.join("\n"))
        .replace("@CALL@", &call)
        .replace("@EMIT@", &emit)
        .replace("@CLEANUP@", &cleanup.join("\n")))
}
