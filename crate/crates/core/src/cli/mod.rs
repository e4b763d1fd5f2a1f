//! The `comodi` command line.
//!
//! Exit codes: 0 success; 1 usage or input error (bad arguments, unreadable
//! or malformed files, unknown records, missing endpoint configuration);
//! 2 validation or semantic rejection (violations, refused edits, invalid
//! or duplicate publications, failed compiles, failed nodes); 3 remote or
//! IO failure. With `--json` every invocation prints exactly one JSON
//! document on stdout, errors included.

mod serve;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::buildsvc::{compile, CompileClient, CompileRequest, CompileStatus, Toolchains};
use crate::engine::{current_platform, stdlib, Engine, EngineError, LocalArtifacts};
use crate::gluegen::{emit_glue_as, parse_signature, placeholder_name, GlueError, PLACEHOLDER_VERSION};
use crate::http::ApiError;
use crate::model::{
    parse_descriptor, serialize_descriptor, ComponentDescriptor, DescriptorError, GlobalName, NodeSpec, PortRef,
    Project, Value, Version,
};
use crate::registry::{RegistryClient, RegistryRecord, SearchQuery, VersionSel};
use crate::wiring::{self, ChainResolver, Library, Resolver, Violation, ViolationCode};

pub use serve::{serve_project, ServeError, ServeOptions};

#[derive(Debug, Parser)]
#[command(
    name = "comodi",
    version,
    about = "Build, publish and run scientific software components"
)]
struct Cli {
    /// Print one JSON document on stdout instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    /// Registry service URL.
    #[arg(long, global = true, value_name = "URL")]
    registry: Option<String>,
    /// Compile service URL.
    #[arg(long, global = true, value_name = "URL")]
    server: Option<String>,
    /// Configuration file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Extra directory of `*.comodi.json` descriptors (repeatable).
    #[arg(long = "library", global = true, value_name = "DIR")]
    libraries: Vec<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate glue and a descriptor skeleton from a routine signature.
    Wrap {
        signature: PathBuf,
        #[arg(long, default_value = "python")]
        template: String,
        /// Component name announced by the glue (default local.<routine>).
        #[arg(long)]
        name: Option<String>,
        #[arg(long = "version")]
        component_version: Option<String>,
        /// Where to write the files (default: next to the signature).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compile sources on a compile server, or locally with --toolchains.
    Compile {
        #[arg(required = true)]
        sources: Vec<PathBuf>,
        #[arg(long)]
        language: String,
        /// Target platform (default: this host).
        #[arg(long)]
        platform: Option<String>,
        /// Where to write the artifact.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        entry_hint: Option<String>,
        /// Toolchain option (repeatable).
        #[arg(long = "option", value_name = "KEY=VALUE")]
        options: Vec<String>,
        /// Compile locally with this toolchain configuration instead.
        #[arg(long)]
        toolchains: Option<PathBuf>,
    },
    /// Register a descriptor and its artifact location with the registry.
    Publish {
        descriptor: PathBuf,
        #[arg(long)]
        artifact_url: String,
        #[arg(long, default_value = "")]
        publisher: String,
    },
    /// Search the registry.
    Search(SearchArgs),
    /// Fetch a registry record and count the download.
    Fetch {
        name: String,
        #[arg(long = "version", conflicts_with = "latest")]
        component_version: Option<String>,
        /// Highest published version (the default).
        #[arg(long)]
        latest: bool,
        /// Write the descriptor to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edit and check project files.
    #[command(subcommand)]
    Project(ProjectCommand),
    /// Execute a project and write its run report.
    Run {
        project: PathBuf,
        /// Report path (default: <project>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run independent nodes concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Serve the project editing API over HTTP.
    Serve {
        project: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8780")]
        listen: String,
    },
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    text: Option<String>,
    #[arg(long)]
    tag: Option<String>,
    /// Type some provides port must supply, e.g. `array<real64,1>`.
    #[arg(long)]
    provides: Option<String>,
    /// Type some uses port must accept.
    #[arg(long)]
    uses: Option<String>,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum ProjectCommand {
    /// Create an empty project file.
    New {
        file: PathBuf,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(long)]
        force: bool,
    },
    /// Add a component instance.
    Add {
        file: PathBuf,
        id: String,
        component: String,
        /// Component version (default: highest known).
        #[arg(long = "version")]
        component_version: Option<String>,
        /// Parameter binding (repeatable).
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
    },
    /// Connect a provides port to a uses port.
    Connect { file: PathBuf, src: String, dst: String },
    /// Swap a node's component for a substitutable one.
    Replace {
        file: PathBuf,
        id: String,
        component: String,
        #[arg(long = "version")]
        component_version: Option<String>,
    },
    /// Check a project and list violations.
    Validate { file: PathBuf },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    registry: Option<String>,
    compile_server: Option<String>,
    #[serde(default)]
    library: Vec<PathBuf>,
}

/// A failed invocation.
#[derive(Debug)]
struct Failure {
    exit: i32,
    code: String,
    detail: String,
    data: Option<Box<serde_json::Value>>,
}

impl Failure {
    fn new(exit: i32, code: impl Into<String>, detail: impl Into<String>) -> Self {
        Failure {
            exit,
            code: code.into(),
            detail: detail.into(),
            data: None,
        }
    }

    fn user(code: &str, detail: impl Into<String>) -> Self {
        Failure::new(1, code, detail)
    }

    fn rejected(code: &str, detail: impl Into<String>) -> Self {
        Failure::new(2, code, detail)
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::user("NOT_FOUND", format!("{}: {e}", path.display()))
        } else {
            Failure::new(3, "IO", format!("{}: {e}", path.display()))
        }
    }

    fn with(mut self, data: serde_json::Value) -> Self {
        self.data = Some(Box::new(data));
        self
    }

    fn violations(vs: &[Violation]) -> Self {
        let detail = vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n");
        Failure::rejected(vs.first().map_or("INVALID", |v| v.code.as_str()), detail).with(json!({ "violations": vs }))
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let exit = match &e {
            ApiError::Remote { status: 404 | 400, .. } => 1,
            ApiError::Remote { status, .. } if *status < 500 => 2,
            _ => 3,
        };
        Failure::new(exit, e.code(), e.to_string())
    }
}

impl From<Violation> for Failure {
    fn from(v: Violation) -> Self {
        Failure::violations(&[v])
    }
}

/// A successful invocation: text for humans, a document for `--json`.
struct Done {
    exit: i32,
    text: String,
    doc: serde_json::Value,
}

impl Done {
    fn ok(text: impl Into<String>, doc: serde_json::Value) -> Self {
        Done {
            exit: 0,
            text: text.into(),
            doc,
        }
    }
}

struct Context {
    registry: Option<String>,
    server: Option<String>,
    libraries: Vec<PathBuf>,
}

fn context(cli: &Cli) -> Result<Context, Failure> {
    let config: Config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Failure::user("BAD_CONFIG", format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    let env = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
    let mut libraries = cli.libraries.clone();
    libraries.extend(config.library);
    Ok(Context {
        registry: cli
            .registry
            .clone()
            .or_else(|| env("COMODI_REGISTRY"))
            .or(config.registry),
        server: cli
            .server
            .clone()
            .or_else(|| env("COMODI_COMPILE_SERVER"))
            .or(config.compile_server),
        libraries,
    })
}

impl Context {
    fn registry(&self) -> Result<RegistryClient, Failure> {
        self.registry.as_ref().map(RegistryClient::new).ok_or_else(|| {
            Failure::user(
                "NO_REGISTRY",
                "no registry configured (use --registry, COMODI_REGISTRY or the config file)",
            )
        })
    }

    /// Builtins first, then every library directory, then the project's own
    /// directory.
    fn resolver(&self, project_dir: Option<&Path>) -> Result<ChainResolver, Failure> {
        let mut lib = Library::new();
        for dir in self.libraries.iter().map(PathBuf::as_path).chain(project_dir) {
            lib.load_dir(dir)
                .map_err(|e| Failure::user("BAD_LIBRARY", e.to_string()))?;
        }
        Ok(ChainResolver::new().push(stdlib::examples()).push(lib))
    }

    fn artifact_roots(&self, project_dir: &Path) -> LocalArtifacts {
        LocalArtifacts::new(std::iter::once(project_dir.to_path_buf()).chain(self.libraries.iter().cloned()))
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

/// Writes via a temporary file in the target directory and a rename, so
/// a failure never leaves a partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let failed = |e: std::io::Error| Failure::new(3, "IO", format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path)).map_err(failed)?;
    tmp.write_all(bytes).map_err(failed)?;
    tmp.as_file().sync_all().map_err(failed)?;
    tmp.persist(path).map_err(|e| failed(e.error))?;
    Ok(())
}

fn load_project(path: &Path) -> Result<Project, Failure> {
    Project::from_json(&read(path)?).map_err(|e| Failure::user("BAD_PROJECT", format!("{}: {e}", path.display())))
}

fn save_project(path: &Path, project: &Project) -> Result<(), Failure> {
    write_atomic(path, project.to_json().as_bytes())
}

fn parse_name(s: &str) -> Result<GlobalName, Failure> {
    s.parse()
        .map_err(|e| Failure::user("BAD_ARGUMENT", format!("component name `{s}`: {e}")))
}

fn parse_version(s: &str) -> Result<Version, Failure> {
    s.parse()
        .map_err(|e| Failure::user("BAD_ARGUMENT", format!("version `{s}`: {e}")))
}

fn parse_port(s: &str) -> Result<PortRef, Failure> {
    s.parse()
        .map_err(|e| Failure::user("BAD_ARGUMENT", format!("port `{s}`: {e}")))
}

/// Highest known version unless one is given.
fn pick(
    resolver: &dyn Resolver,
    name: &GlobalName,
    version: Option<&str>,
) -> Result<std::sync::Arc<ComponentDescriptor>, Failure> {
    let found = match version {
        Some(v) => resolver.resolve(name, &parse_version(v)?),
        None => resolver
            .catalog()
            .into_iter()
            .filter(|d| &d.name == name)
            .max_by_key(|d| d.version),
    };
    found.ok_or_else(|| {
        Violation::new(
            ViolationCode::UnknownComponent,
            name.as_str(),
            format!("{name}@{} is not known", version.unwrap_or("any version")),
        )
        .into()
    })
}

fn param_value(raw: &str, descriptor: &ComponentDescriptor) -> Result<(String, Value), Failure> {
    let (name, text) = raw
        .split_once('=')
        .ok_or_else(|| Failure::user("BAD_ARGUMENT", format!("parameter `{raw}` is not NAME=VALUE")))?;
    let json = serde_json::from_str(text).unwrap_or_else(|_| serde_json::Value::String(text.to_string()));
    let value =
        Value::scalar_from_json(&json).map_err(|e| Failure::user("BAD_ARGUMENT", format!("parameter {name}: {e}")))?;
    let value = match descriptor.param(name) {
        Some(spec) => value.coerce_scalar(&spec.datatype).unwrap_or(value),
        None => value,
    };
    Ok((name.to_string(), value))
}

fn wrap(
    signature: &Path,
    template: &str,
    name: Option<&str>,
    version: Option<&str>,
    out_dir: Option<&Path>,
) -> Result<Done, Failure> {
    let text = read(signature)?;
    let sig =
        parse_signature(&text).map_err(|e| Failure::user("BAD_SIGNATURE", format!("{}:{e}", signature.display())))?;
    let name = match name {
        Some(n) => parse_name(n)?,
        None => placeholder_name(&sig.routine),
    };
    let version = version.map(parse_version).transpose()?.unwrap_or(PLACEHOLDER_VERSION);
    let bundle = emit_glue_as(&sig, template, &name, &version).map_err(|e| match e {
        GlueError::UnknownTemplate(_) => Failure::user("UNKNOWN_TEMPLATE", e.to_string()),
        GlueError::UnsupportedType { .. } => Failure::rejected("UNSUPPORTED_TYPE", e.to_string()),
        GlueError::ResultCollision => Failure::rejected("RESULT_COLLISION", e.to_string()),
    })?;
    let dir = out_dir.map_or_else(|| parent_dir(signature), Path::to_path_buf);
    let stem = signature
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| sig.routine.clone());
    let descriptor_path = dir.join(format!("{stem}.comodi.json"));
    let glue_path = dir.join(&bundle.glue_file);
    write_atomic(&glue_path, bundle.glue_source.as_bytes())?;
    write_atomic(
        &descriptor_path,
        serialize_descriptor(&bundle.descriptor_skeleton).as_bytes(),
    )?;
    let manifest: Vec<_> = bundle
        .entry_manifest
        .iter()
        .map(|e| json!({ "entry": e.entry, "routine": e.routine, "ports": e.ports }))
        .collect();
    Ok(Done::ok(
        format!("wrote {}\nwrote {}", descriptor_path.display(), glue_path.display()),
        json!({
            "descriptor": descriptor_path,
            "glue": glue_path,
            "component": bundle.descriptor_skeleton.id(),
            "entry_manifest": manifest,
        }),
    ))
}

#[allow(clippy::too_many_arguments)]
fn compile_cmd(
    ctx: &Context,
    sources: &[PathBuf],
    language: &str,
    platform: Option<&str>,
    out: &Path,
    entry_hint: Option<&str>,
    options: &[String],
    toolchains: Option<&Path>,
) -> Result<Done, Failure> {
    let platform = platform.map_or_else(current_platform, str::to_string);
    let mut req = CompileRequest::new(platform.clone(), language);
    req.entry_hint = entry_hint.map(str::to_string);
    for o in options {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::user("BAD_ARGUMENT", format!("option `{o}` is not KEY=VALUE")))?;
        req.options.insert(k.to_string(), v.to_string());
    }
    for path in sources {
        let content = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
        let name = path
            .file_name()
            .ok_or_else(|| Failure::user("BAD_ARGUMENT", format!("{} is not a file", path.display())))?;
        req.sources
            .push(crate::buildsvc::SourceFile::new(name.to_string_lossy(), content));
    }
    let (result, via) = match toolchains {
        Some(file) => {
            let chains = Toolchains::load(file).map_err(|e| Failure::user("BAD_CONFIG", e))?;
            let result = compile(&req, &chains).map_err(|e| {
                let exit = if e.code() == "TOOLCHAIN_FAILURE" { 3 } else { 2 };
                Failure::new(exit, e.code(), e.to_string())
            })?;
            (result, "local toolchain".to_string())
        }
        None => {
            let url = match &ctx.server {
                Some(url) => url.clone(),
                None => {
                    let registry = ctx.registry().map_err(|_| {
                        Failure::user(
                            "NO_COMPILE_SERVER",
                            "no compile server configured (use --server, COMODI_COMPILE_SERVER, the config file or a registry)",
                        )
                    })?;
                    registry
                        .compile_servers()?
                        .into_iter()
                        .find(|s| s.platforms.iter().any(|p| p == &platform || p == "any"))
                        .map(|s| s.url)
                        .ok_or_else(|| {
                            Failure::user(
                                "NO_COMPILE_SERVER",
                                format!("the registry lists no compile server for {platform}"),
                            )
                        })?
                }
            };
            (CompileClient::new(url.clone()).compile(&req)?, url)
        }
    };
    let summary = json!({
        "status": result.status,
        "log": result.log,
        "diagnostics": result.diagnostics,
        "via": via,
    });
    match (result.status, &result.artifact) {
        (CompileStatus::Ok, Some(bytes)) => {
            write_atomic(out, bytes)?;
            let mut doc = summary;
            doc["artifact"] = json!(out);
            Ok(Done::ok(format!("compiled via {via}; wrote {}", out.display()), doc))
        }
        _ => {
            Err(Failure::rejected("COMPILE_FAILED", format!("compile failed via {via}:\n{}", result.log)).with(summary))
        }
    }
}

fn publish(ctx: &Context, path: &Path, artifact_url: &str, publisher: &str) -> Result<Done, Failure> {
    let descriptor = parse_descriptor(&read(path)?).map_err(|e| match e {
        DescriptorError::Invalid(_) => Failure::rejected("INVALID_DESCRIPTOR", format!("{}: {e}", path.display())),
        _ => Failure::user("BAD_DESCRIPTOR", format!("{}: {e}", path.display())),
    })?;
    let record = RegistryRecord::new(descriptor, artifact_url, publisher);
    let stored = ctx.registry()?.register(&record)?;
    Ok(Done::ok(
        format!("published {}", stored.id()),
        serde_json::to_value(&stored).expect("records serialize"),
    ))
}

fn record_line(r: &RegistryRecord) -> String {
    format!(
        "{:<48} {:>7} downloads  {}",
        r.id(),
        r.download_count,
        r.descriptor.doc.summary
    )
}

fn search(ctx: &Context, args: &SearchArgs) -> Result<Done, Failure> {
    let ty = |t: &Option<String>| {
        t.as_deref()
            .map(|t| {
                crate::registry::parse_type_param(t)
                    .map_err(|e| Failure::user("BAD_ARGUMENT", format!("type `{t}`: {e}")))
            })
            .transpose()
    };
    let query = SearchQuery {
        text: args.text.clone(),
        tag_prefix: args.tag.clone(),
        provides_type: ty(&args.provides)?,
        uses_type: ty(&args.uses)?,
        limit: args.limit,
    };
    query.check().map_err(|e| Failure::user(e.code(), e.to_string()))?;
    let hits = ctx.registry()?.search(&query)?;
    let text = if hits.is_empty() {
        "no matches".to_string()
    } else {
        hits.iter().map(record_line).collect::<Vec<_>>().join("\n")
    };
    Ok(Done::ok(text, serde_json::to_value(&hits).expect("records serialize")))
}

fn fetch(ctx: &Context, name: &str, version: Option<&str>, out: Option<&Path>) -> Result<Done, Failure> {
    let name = parse_name(name)?;
    let sel = match version {
        Some(v) => VersionSel::Exact(parse_version(v)?),
        None => VersionSel::Latest,
    };
    let client = ctx.registry()?;
    let mut record = client.fetch(&name, &sel)?;
    record.download_count = client.record_download(&name, &record.descriptor.version)?;
    if let Some(out) = out {
        write_atomic(out, serialize_descriptor(&record.descriptor).as_bytes())?;
    }
    let mut text = format!("{}\nartifact: {}", record_line(&record), record.artifact_url);
    if let Some(out) = out {
        text.push_str(&format!("\nwrote {}", out.display()));
    }
    Ok(Done::ok(
        text,
        serde_json::to_value(&record).expect("records serialize"),
    ))
}

fn project(ctx: &Context, cmd: &ProjectCommand) -> Result<Done, Failure> {
    match cmd {
        ProjectCommand::New { file, title, force } => {
            if file.exists() && !force {
                return Err(Failure::user(
                    "EXISTS",
                    format!("{} exists (use --force)", file.display()),
                ));
            }
            let p = Project::new(title.clone());
            save_project(file, &p)?;
            Ok(Done::ok(
                format!("created {}", file.display()),
                serde_json::to_value(&p).expect("projects serialize"),
            ))
        }
        ProjectCommand::Add {
            file,
            id,
            component,
            component_version,
            params,
        } => {
            let p = load_project(file)?;
            let resolver = ctx.resolver(Some(&parent_dir(file)))?;
            let descriptor = pick(&resolver, &parse_name(component)?, component_version.as_deref())?;
            let mut node = NodeSpec::new(descriptor.name.clone(), descriptor.version);
            for raw in params {
                let (k, v) = param_value(raw, &descriptor)?;
                node.params.insert(k, v);
            }
            let next = wiring::add_node(&p, id, node, &resolver)?;
            save_project(file, &next)?;
            Ok(Done::ok(
                format!("added {id} ({})", descriptor.id()),
                serde_json::to_value(&next).expect("projects serialize"),
            ))
        }
        ProjectCommand::Connect { file, src, dst } => {
            let p = load_project(file)?;
            let resolver = ctx.resolver(Some(&parent_dir(file)))?;
            let next = wiring::connect(&p, &parse_port(src)?, &parse_port(dst)?, &resolver)?;
            save_project(file, &next)?;
            Ok(Done::ok(
                format!("connected {src} -> {dst}"),
                serde_json::to_value(&next).expect("projects serialize"),
            ))
        }
        ProjectCommand::Replace {
            file,
            id,
            component,
            component_version,
        } => {
            let p = load_project(file)?;
            let resolver = ctx.resolver(Some(&parent_dir(file)))?;
            let candidate = pick(&resolver, &parse_name(component)?, component_version.as_deref())?;
            let next = wiring::replace_node(&p, id, &candidate, &resolver).map_err(|report| {
                Failure::rejected("NOT_SUBSTITUTABLE", report.to_string()).with(json!({ "report": report }))
            })?;
            save_project(file, &next)?;
            Ok(Done::ok(
                format!("node {id} now runs {}", candidate.id()),
                serde_json::to_value(&next).expect("projects serialize"),
            ))
        }
        ProjectCommand::Validate { file } => {
            let p = load_project(file)?;
            let resolver = ctx.resolver(Some(&parent_dir(file)))?;
            let violations = wiring::validate_project(&p, &resolver);
            if violations.is_empty() {
                Ok(Done::ok(
                    format!("{} is valid", file.display()),
                    json!({ "violations": [] }),
                ))
            } else {
                Err(Failure::violations(&violations))
            }
        }
    }
}

fn run(ctx: &Context, file: &Path, report: Option<&Path>, parallel: bool) -> Result<Done, Failure> {
    let p = load_project(file)?;
    let dir = parent_dir(file);
    let resolver = ctx.resolver(Some(&dir))?;
    let engine = Engine::new(stdlib::examples())
        .with_artifacts(ctx.artifact_roots(&dir))
        .parallel(parallel);
    let result = engine.run(&p, &resolver).map_err(|e| match e {
        EngineError::InvalidProject(vs) => Failure::violations(&vs),
        other => Failure::rejected(other.code(), other.to_string()),
    })?;
    let report_path = report.map_or_else(
        || {
            let stem = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let stem = stem
                .strip_suffix(".project.json")
                .or(stem.strip_suffix(".json"))
                .unwrap_or(&stem)
                .to_string();
            dir.join(format!("{stem}.report.json"))
        },
        Path::to_path_buf,
    );
    let json_text = result.to_json();
    write_atomic(&report_path, json_text.as_bytes())?;
    let mut lines = Vec::new();
    for n in &result.nodes {
        let outputs: Vec<String> = n
            .outputs
            .iter()
            .map(|(k, v)| format!("{k}={}", crate::engine::codec::value_to_json(v)))
            .collect();
        let status = serde_json::to_value(n.status).expect("status serializes");
        let mut line = format!(
            "{:<24} {:<8} {}",
            n.node,
            status.as_str().unwrap_or(""),
            outputs.join(" ")
        );
        if let Some(e) = &n.error {
            line.push_str(&format!("{}: {}", e.code, e.detail));
        }
        lines.push(line.trim_end().to_string());
    }
    lines.push(format!("report written to {}", report_path.display()));
    let doc: serde_json::Value = serde_json::from_str(&json_text).expect("report is JSON");
    Ok(Done {
        exit: if result.succeeded() { 0 } else { 2 },
        text: lines.join("\n"),
        doc,
    })
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<Done, Failure> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::Wrap {
            signature,
            template,
            name,
            component_version,
            out_dir,
        } => wrap(
            signature,
            template,
            name.as_deref(),
            component_version.as_deref(),
            out_dir.as_deref(),
        ),
        Command::Compile {
            sources,
            language,
            platform,
            out,
            entry_hint,
            options,
            toolchains,
        } => compile_cmd(
            &ctx,
            sources,
            language,
            platform.as_deref(),
            out,
            entry_hint.as_deref(),
            options,
            toolchains.as_deref(),
        ),
        Command::Publish {
            descriptor,
            artifact_url,
            publisher,
        } => publish(&ctx, descriptor, artifact_url, publisher),
        Command::Search(args) => search(&ctx, args),
        Command::Fetch {
            name,
            component_version,
            out,
            ..
        } => fetch(&ctx, name, component_version.as_deref(), out.as_deref()),
        Command::Project(cmd) => project(&ctx, cmd),
        Command::Run {
            project,
            report,
            parallel,
        } => run(&ctx, project, report.as_deref(), *parallel),
        Command::Serve { project, listen } => {
            let dir = parent_dir(project);
            let options = ServeOptions {
                project: project.clone(),
                resolver: ctx.resolver(Some(&dir))?,
                artifacts: ctx.artifact_roots(&dir),
                registry: ctx.registry.clone(),
            };
            let handle = serve_project(options, listen).map_err(|e| match e {
                ServeError::Project(detail) => Failure::user("BAD_PROJECT", detail),
                ServeError::Bind(e) => Failure::new(3, "BIND", format!("{listen}: {e}")),
            })?;
            let url = handle.url();
            if cli.json {
                let _ = writeln!(stdout, "{}", json!({ "url": url }));
            } else {
                let _ = writeln!(stdout, "serving {} on {url}", project.display());
            }
            let _ = stdout.flush();
            handle.wait();
            Ok(Done::ok("", json!(null)))
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let wants_json = args.iter().skip(1).any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            if matches!(e.kind(), ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stderr, "{e}");
                return 1;
            }
            if wants_json {
                let doc = json!({ "error": { "code": "USAGE", "detail": e.to_string().trim_end() } });
                let _ = writeln!(stdout, "{doc}");
            }
            let _ = write!(stderr, "{e}");
            return 1;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(done) => {
            if matches!(cli.command, Command::Serve { .. }) {
                return done.exit;
            }
            if cli.json {
                let _ = writeln!(stdout, "{}", done.doc);
            } else if !done.text.is_empty() {
                let _ = writeln!(stdout, "{}", done.text);
            }
            done.exit
        }
        Err(f) => {
            if cli.json {
                let mut error = json!({ "code": f.code, "detail": f.detail });
                if let Some(serde_json::Value::Object(extra)) = f.data.map(|d| *d) {
                    for (k, v) in extra {
                        error[k] = v;
                    }
                }
                let _ = writeln!(stdout, "{}", json!({ "error": error }));
            }
            let _ = writeln!(stderr, "error [{}]: {}", f.code, f.detail);
            f.exit
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(
            std::iter::once("comodi").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli(&["frobnicate"]).0, 1);
        let (code, out, _) = cli(&["--json", "project", "validate"]);
        assert_eq!(code, 1);
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(doc["error"]["code"], "USAGE");
        assert_eq!(cli(&["--help"]).0, 0);
    }

    #[test]
    fn project_editing_round() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("demo.project.json");
        let f = file.to_str().unwrap();
        assert_eq!(cli(&["project", "new", f, "--title", "demo"]).0, 0);
        assert_eq!(cli(&["project", "new", f]).0, 1);
        assert_eq!(
            cli(&[
                "project",
                "add",
                f,
                "src",
                "org.comodi.examples.const",
                "--param",
                "value=2"
            ])
            .0,
            0
        );
        assert_eq!(cli(&["project", "add", f, "sq", "org.comodi.examples.square"]).0, 0);
        assert_eq!(cli(&["project", "add", f, "out", "org.comodi.examples.capture"]).0, 0);
        assert_eq!(cli(&["project", "add", f, "zz", "org.comodi.examples.nothing"]).0, 2);
        assert_eq!(cli(&["project", "connect", f, "src.x", "sq.x"]).0, 0);
        let (code, _, err) = cli(&["project", "validate", f]);
        assert_eq!(code, 2);
        assert!(err.contains("UNBOUND_REQUIRED_USES"), "{err}");
        assert_eq!(cli(&["project", "connect", f, "sq.y", "out.x"]).0, 0);
        assert_eq!(cli(&["project", "connect", f, "src.x", "out.x"]).0, 2);
        assert_eq!(cli(&["project", "validate", f]).0, 0);
        assert_eq!(cli(&["project", "replace", f, "sq", "org.comodi.examples.cube"]).0, 0);
        assert_eq!(
            cli(&["project", "replace", f, "sq", "org.comodi.examples.greeting"]).0,
            2
        );
        let report = dir.path().join("out.json");
        let (code, out, _) = cli(&["--json", "run", f, "--report", report.to_str().unwrap()]);
        assert_eq!(code, 0);
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        let written = std::fs::read_to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<serde_json::Value>(&written).unwrap(), doc);
        let cube = doc["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .find(|n| n["node"] == "out")
            .unwrap();
        assert_eq!(cube["outputs"]["value"], 8.0);
    }
}
