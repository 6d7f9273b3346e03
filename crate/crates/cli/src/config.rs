use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use infraloom::runtime::{CostParams, WarmPoolParams};
use infraloom::schema::WarmingConfig;

use crate::error::CliError;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses flat `key = value` text. Blank lines and lines starting with `#`
/// are ignored; keys may not repeat.
pub fn parse_kv(text: &str, file: &Path) -> Result<Vec<Entry>, CliError> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let invalid = |message: String| CliError::Config {
            file: file.to_path_buf(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("expected `key = value`, found {line:?}")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(invalid("empty key".into()));
        }
        if let Some(first) = seen.insert(key.to_string(), i + 1) {
            return Err(invalid(format!("duplicate key {key:?} (first set on line {first})")));
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn typed<T: FromStr>(file: &Path, e: &Entry, what: &str) -> Result<T, CliError> {
    e.value.parse().map_err(|_| CliError::Config {
        file: file.to_path_buf(),
        line: e.line,
        message: format!("{}: expected {what}, found {:?}", e.key, e.value),
    })
}

fn valid_app_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z'))
        && name.len() <= 63
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    /// Directory holding the config file; relative paths resolve against it.
    pub root: PathBuf,
    pub app_name: String,
    pub source_dirs: Vec<PathBuf>,
    pub static_dir: PathBuf,
    pub bucket: String,
    pub region: String,
    pub provider: String,
    pub warming: WarmingConfig,
    pub out_dir: PathBuf,
    pub memory_mb: u32,
    pub sim: WarmPoolParams,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_text(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, root)
    }

    pub fn parse(text: &str, file: &Path, root: PathBuf) -> Result<Self, CliError> {
        let mut cfg = ProjectConfig {
            app_name: String::new(),
            source_dirs: vec![root.join("src")],
            static_dir: root.join("static"),
            bucket: String::new(),
            region: "us-east-1".into(),
            provider: "aws".into(),
            warming: WarmingConfig::default(),
            out_dir: root.join("deploy"),
            memory_mb: 3072,
            sim: WarmPoolParams::default(),
            root,
        };
        let entries = parse_kv(text, file)?;
        for e in &entries {
            let err = |message: String| CliError::Config {
                file: file.to_path_buf(),
                line: e.line,
                message,
            };
            match e.key.as_str() {
                "app_name" => cfg.app_name = e.value.clone(),
                "source_dirs" => {
                    cfg.source_dirs = e
                        .value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| cfg.root.join(s))
                        .collect();
                }
                "static_dir" => cfg.static_dir = cfg.root.join(&e.value),
                "bucket" => cfg.bucket = e.value.clone(),
                "region" => cfg.region = e.value.clone(),
                "provider" => cfg.provider = e.value.clone(),
                "warming_enabled" => cfg.warming.enabled = typed(file, e, "true or false")?,
                "warming_period_minutes" => {
                    cfg.warming.period_minutes = typed(file, e, "a whole number of minutes")?;
                    if cfg.warming.period_minutes == 0 {
                        return Err(err("warming_period_minutes must be at least 1".into()));
                    }
                }
                "out_dir" => cfg.out_dir = cfg.root.join(&e.value),
                "memory_mb" => cfg.memory_mb = typed(file, e, "megabytes")?,
                "sim_max_instances" => cfg.sim.max_instances = typed(file, e, "an instance count")?,
                "sim_expiry_minutes" => cfg.sim.expiry_minutes = typed(file, e, "minutes")?,
                "sim_cold_start_ms" => cfg.sim.cold_start_ms = typed(file, e, "milliseconds")?,
                "sim_service_time_ms" => cfg.sim.service_time_ms = typed(file, e, "milliseconds")?,
                "sim_warm_pool_target" => cfg.sim.warm_pool_target = typed(file, e, "an instance count")?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        if !valid_app_name(&cfg.app_name) {
            return Err(CliError::Config {
                file: file.to_path_buf(),
                line: entries.iter().find(|e| e.key == "app_name").map_or(0, |e| e.line),
                message: format!("app_name {:?} must match [a-z][a-z0-9-]{{0,62}}", cfg.app_name),
            });
        }
        if cfg.bucket.is_empty() {
            cfg.bucket = format!("{}-artifacts", cfg.app_name);
        }
        Ok(cfg)
    }
}

/// Reads a pricing file. Memory defaults to the project's function size.
pub fn load_pricing(path: &Path, memory_mb: u32, warming: &WarmingConfig) -> Result<CostParams, CliError> {
    let text = read_text(path)?;
    let mut p = CostParams {
        memory_gb: f64::from(memory_mb) / 1024.0,
        warming_per_month: infraloom::runtime::warming_per_month(warming),
        ..CostParams::default()
    };
    for e in parse_kv(&text, path)? {
        let slot = match e.key.as_str() {
            "price_per_request" => &mut p.price_per_request,
            "price_per_gb_second" => &mut p.price_per_gb_second,
            "memory_gb" => &mut p.memory_gb,
            "requests_per_month" => &mut p.requests_per_month,
            "avg_duration_ms" => &mut p.avg_duration_ms,
            other => {
                return Err(CliError::Config {
                    file: path.to_path_buf(),
                    line: e.line,
                    message: format!("unknown key {other:?}"),
                })
            }
        };
        let v: f64 = typed(path, &e, "a number")?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Config {
                file: path.to_path_buf(),
                line: e.line,
                message: format!("{} must be a nonnegative number", e.key),
            });
        }
        *slot = v;
    }
    Ok(p)
}

/// Canned handler responses, keyed by handler name.
pub fn load_stubs(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = read_text(path)?;
    Ok(parse_kv(&text, path)?.into_iter().map(|e| (e.key, e.value)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProjectConfig, CliError> {
        ProjectConfig::parse(text, Path::new("infraloom.conf"), PathBuf::from("/p"))
    }

    #[test]
    fn full_config() {
        let cfg = parse(
            "# demo\napp_name = demo-app\nsource_dirs = src, lib\nstatic_dir = web\n\
             warming_enabled = false\nwarming_period_minutes = 3\nout_dir = build/tf\n",
        )
        .unwrap();
        assert_eq!(cfg.app_name, "demo-app");
        assert_eq!(cfg.source_dirs, vec![PathBuf::from("/p/src"), PathBuf::from("/p/lib")]);
        assert_eq!(cfg.static_dir, PathBuf::from("/p/web"));
        assert_eq!(cfg.out_dir, PathBuf::from("/p/build/tf"));
        assert_eq!(
            cfg.warming,
            WarmingConfig {
                enabled: false,
                period_minutes: 3
            }
        );
        assert_eq!(cfg.bucket, "demo-app-artifacts");
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "app_name = Demo",
            "app_name = 9lives",
            "app_name = ok\nwarming_period_minutes = 0",
            "app_name = ok\nwarming_enabled = yes",
            "app_name = ok\ncolour = blue",
            "app_name = ok\napp_name = again",
            "app_name ok",
        ] {
            assert!(matches!(parse(text), Err(CliError::Config { .. })), "{text}");
        }
    }

    #[test]
    fn error_lines() {
        match parse("app_name = ok\n\n# x\nregion\n") {
            Err(CliError::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }
}
