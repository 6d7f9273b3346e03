use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

use infraloom::permissions::derive_policy;
use infraloom::runtime::{
    estimate_cost, load_dispatch_table, render_value, run_batch, serve, simulate_warm_pool, Converters, CostEstimate,
    CostParams, DispatchTable, HandlerRegistry, Value, WorkloadEntry,
};
use infraloom::schema::ValueType;
use infraloom::synth::generate_hcl;
use serde::Serialize;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

use crate::config::{load_pricing, load_stubs, ProjectConfig};
use crate::error::CliError;
use crate::project::{load_project, sha256_hex, Project};

pub const TERRAFORM_ENV: &str = "INFRALOOM_TERRAFORM";
const SERVE_WORKERS: usize = 8;

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Writes `main.tf`, `policy.txt` and `schema.json` into the output directory.
pub fn synth(config_path: &Path) -> Result<Project, CliError> {
    let project = load_project(config_path)?;
    let provider = project.provider_config()?;
    let hcl = generate_hcl(&project.schema, &provider).map_err(|e| CliError::Synth(e.to_string()))?;
    let policy = derive_policy(&project.schema).map_err(|e| CliError::Synth(e.to_string()))?;
    let out = &project.config.out_dir;
    write_file(&out.join("main.tf"), hcl.as_bytes())?;
    write_file(&out.join("policy.txt"), policy.to_string().as_bytes())?;
    write_file(&out.join("schema.json"), project.schema.to_canonical_json().as_bytes())?;
    eprintln!(
        "synthesized {} route(s), {} static file(s), {} grant(s) into {}",
        project.schema.dynamic_routes.len(),
        project.schema.static_routes.len(),
        project.schema.grants.len(),
        out.display()
    );
    Ok(project)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestEntry {
    pub logical_name: String,
    pub source_path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleManifest {
    pub entries: Vec<ManifestEntry>,
    pub schema_digest: String,
}

fn static_key(path: &str) -> String {
    match path.trim_start_matches('/') {
        "" => "index".into(),
        key => key.into(),
    }
}

/// Writes `bundle.zip` (static files plus `schema.json`) and `manifest.json`.
pub fn bundle(config_path: &Path) -> Result<BundleManifest, CliError> {
    let project = load_project(config_path)?;
    let out = &project.config.out_dir;
    let schema_json = project.schema.to_canonical_json().into_bytes();
    let schema_digest = sha256_hex(&schema_json);

    // Archive name -> contents; a BTreeMap keeps the archive order fixed.
    let mut archive: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let mut entries = vec![ManifestEntry {
        logical_name: "schema.json".into(),
        source_path: "schema.json".into(),
        sha256: schema_digest.clone(),
    }];
    archive.insert("schema.json".into(), schema_json.clone());
    for st in &project.schema.static_routes {
        let path = project.config.static_dir.join(&st.source_file);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::MissingStaticFile(format!(
                    "{} (declared at {})",
                    path.display(),
                    st.origin
                )))
            }
            Err(e) => return Err(CliError::io(&path, e)),
        };
        entries.push(ManifestEntry {
            logical_name: static_key(&st.path),
            source_path: st.source_file.clone(),
            sha256: sha256_hex(&bytes),
        });
        archive.insert(format!("static/{}", st.source_file), bytes);
    }
    entries.sort_by(|a, b| a.logical_name.cmp(&b.logical_name));

    let zip_path = out.join("bundle.zip");
    let mut zip = ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    for (name, bytes) in &archive {
        zip.start_file(name.as_str(), options)
            .and_then(|()| zip.write_all(bytes).map_err(Into::into))
            .map_err(|e| CliError::io(&zip_path, std::io::Error::other(e)))?;
    }
    let zip_bytes = zip
        .finish()
        .map_err(|e| CliError::io(&zip_path, std::io::Error::other(e)))?
        .into_inner();

    let manifest = BundleManifest { entries, schema_digest };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
    manifest_json.push('\n');
    write_file(&zip_path, &zip_bytes)?;
    write_file(&out.join("manifest.json"), manifest_json.as_bytes())?;
    write_file(&out.join("schema.json"), &schema_json)?;
    eprintln!("bundled {} file(s) into {}", archive.len(), zip_path.display());
    Ok(manifest)
}

/// Finds the terraform binary: `INFRALOOM_TERRAFORM` first, then `PATH`.
pub fn locate_terraform() -> Result<PathBuf, CliError> {
    match std::env::var_os(TERRAFORM_ENV).filter(|v| !v.is_empty()) {
        Some(v) => {
            let p = PathBuf::from(&v);
            if p.is_file() {
                Ok(p)
            } else {
                which::which(&v).map_err(|_| {
                    CliError::TerraformMissing(format!("{TERRAFORM_ENV}={} does not name an executable", p.display()))
                })
            }
        }
        None => which::which("terraform").map_err(|_| {
            CliError::TerraformMissing(format!(
                "terraform was not found on PATH; install it or point {TERRAFORM_ENV} at the binary"
            ))
        }),
    }
}

fn terraform(bin: &Path, dir: &Path, args: &[&str]) -> Result<(), CliError> {
    eprintln!("$ terraform {}", args.join(" "));
    let status = Command::new(bin)
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::from(std::io::stderr()))
        .status()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                CliError::TerraformMissing(format!("cannot run {}: {e}", bin.display()))
            }
            _ => CliError::io(bin, e),
        })?;
    if status.success() {
        Ok(())
    } else {
        Err(CliError::TerraformFailed(format!(
            "terraform {} failed ({status})",
            args[0]
        )))
    }
}

/// Validates (dry run) or applies the synthesized configuration.
pub fn deploy(config_path: &Path, dry_run: bool) -> Result<(), CliError> {
    let config = ProjectConfig::load(config_path)?;
    let bin = locate_terraform()?;
    let out = &config.out_dir;
    let main_tf = out.join("main.tf");
    if !main_tf.is_file() {
        return Err(CliError::MissingArtifact(main_tf));
    }
    if dry_run {
        terraform(&bin, out, &["init", "-backend=false", "-input=false", "-no-color"])?;
        terraform(&bin, out, &["validate", "-no-color"])?;
        eprintln!("terraform validate passed");
    } else {
        let zip = out.join("bundle.zip");
        if !zip.is_file() {
            return Err(CliError::MissingArtifact(zip));
        }
        terraform(&bin, out, &["init", "-input=false", "-no-color"])?;
        terraform(&bin, out, &["apply", "-auto-approve", "-input=false", "-no-color"])?;
    }
    Ok(())
}

/// Replaces `{param}` placeholders with the rendered argument values.
fn fill_template(template: &str, names: &[String], args: &[Value]) -> String {
    let converters = Converters::new();
    names
        .iter()
        .zip(args)
        .fold(template.to_string(), |text, (name, value)| {
            let rendered = render_value(value, &converters).unwrap_or_default();
            text.replace(&format!("{{{name}}}"), &rendered)
        })
}

/// Demo handlers: each route echoes its handler name unless `stubs` supplies
/// a response template for it.
pub fn stub_registry(project: &Project, stubs: &BTreeMap<String, String>) -> HandlerRegistry {
    let mut registry = HandlerRegistry::new();
    for route in &project.schema.dynamic_routes {
        let name = route.handler.name.clone();
        let names: Vec<String> = route.params.iter().map(|p| p.name.clone()).collect();
        let unit = route.return_type == ValueType::Unit;
        let template = stubs.get(&name).cloned().unwrap_or_else(|| name.clone());
        registry = registry.handler(&name, move |args| {
            Ok(if unit {
                Value::Unit
            } else {
                Value::Str(fill_template(&template, &names, args))
            })
        });
    }
    for unknown in stubs.keys().filter(|k| !registry.has_handler(k)) {
        eprintln!("warning: stub {unknown:?} does not name a route handler");
    }
    registry
}

pub fn dispatch_table(project: &Project, stubs: Option<&Path>) -> Result<DispatchTable, CliError> {
    let stubs = match stubs {
        Some(p) => load_stubs(p)?,
        None => BTreeMap::new(),
    };
    let registry = stub_registry(project, &stubs);
    let table = load_dispatch_table(&project.schema, &registry).map_err(|e| CliError::Synth(e.to_string()))?;
    Ok(table.with_static_root(&project.config.static_dir))
}

/// Serves over HTTP until killed, or replays an event file when `events` is
/// given (`-` reads standard input).
pub fn serve_cmd(config_path: &Path, port: u16, stubs: Option<&Path>, events: Option<&Path>) -> Result<(), CliError> {
    let project = load_project(config_path)?;
    let table = dispatch_table(&project, stubs)?;
    if let Some(events) = events {
        let stdout = std::io::stdout().lock();
        let result = if events == Path::new("-") {
            run_batch(std::io::stdin().lock(), stdout, &table)
        } else {
            let file = File::open(events).map_err(|e| CliError::io(events, e))?;
            run_batch(BufReader::new(file), stdout, &table)
        };
        return match result {
            Ok(n) => {
                eprintln!("handled {n} event(s)");
                Ok(())
            }
            Err(infraloom::runtime::ServerError::Io(e)) => Err(CliError::io(events, e)),
            Err(e) => Err(CliError::Workload(e.to_string())),
        };
    }
    let handle = serve(Arc::new(table), &format!("127.0.0.1:{port}"), SERVE_WORKERS)
        .map_err(|e| CliError::Bind(e.to_string()))?;
    eprintln!("listening on http://{}", handle.local_addr());
    handle.wait();
    Ok(())
}

pub fn read_workload(path: &Path) -> Result<Vec<WorkloadEntry>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => CliError::io(path, std::io::Error::other(e.to_string())),
                _ => CliError::Workload(format!("{}: {e}", path.display())),
            })
        })
        .collect()
}

pub fn simulate(config_path: &Path, workload: &Path) -> Result<(), CliError> {
    let config = ProjectConfig::load(config_path)?;
    let entries = read_workload(workload)?;
    let report =
        simulate_warm_pool(&entries, &config.sim, &config.warming).map_err(|e| CliError::Workload(e.to_string()))?;
    print_json(&report.metrics)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct EstimateOutput {
    params: CostParams,
    #[serde(flatten)]
    estimate: CostEstimate,
}

pub fn estimate(config_path: &Path, pricing: &Path) -> Result<(), CliError> {
    let config = ProjectConfig::load(config_path)?;
    let params = load_pricing(pricing, config.memory_mb, &config.warming)?;
    let estimate = estimate_cost(&params);
    print_json(&EstimateOutput { params, estimate })
}
