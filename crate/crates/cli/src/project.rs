use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use infraloom::dsl::{parse_file, SourceFile};
use infraloom::schema::{build_schema, Schema, SchemaConfig};
use infraloom::synth::ProviderConfig;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::ProjectConfig;
use crate::error::CliError;

pub struct Project {
    pub config: ProjectConfig,
    pub schema: Schema,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `path` relative to `base`, with `/` separators.
pub fn relative(path: &Path, base: &Path) -> String {
    let rel = pathdiff::diff_paths(path, base).unwrap_or_else(|| path.to_path_buf());
    let parts: Vec<String> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if parts.is_empty() {
        ".".into()
    } else {
        parts.join("/")
    }
}

/// Every `.kls` file under the configured source directories, sorted.
pub fn source_files(cfg: &ProjectConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for dir in &cfg.source_dirs {
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(dir).to_path_buf();
                CliError::io(&path, e.into())
            })?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "kls") {
                out.push(entry.into_path());
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Parses every source file and builds the schema. All diagnostics are
/// collected before failing.
pub fn load_project(config_path: &Path) -> Result<Project, CliError> {
    let config = ProjectConfig::load(config_path)?;
    let mut files: Vec<SourceFile> = Vec::new();
    let mut diagnostics = Vec::new();
    for path in source_files(&config)? {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        match parse_file(&text, &relative(&path, &config.root)) {
            Ok(f) => files.push(f),
            Err(e) => diagnostics.push(e.to_string()),
        }
    }
    if !diagnostics.is_empty() {
        return Err(CliError::Diagnostics(diagnostics));
    }
    let schema_config = SchemaConfig {
        app_name: config.app_name.clone(),
        warming: config.warming,
    };
    let schema = build_schema(&files, &schema_config)
        .map_err(|errs| CliError::Diagnostics(errs.iter().map(ToString::to_string).collect()))?;
    Ok(Project { config, schema })
}

impl Project {
    /// Digests of the static sources that exist on disk, keyed by source file.
    pub fn static_digests(&self) -> Result<BTreeMap<String, String>, CliError> {
        let mut out = BTreeMap::new();
        for st in &self.schema.static_routes {
            let path = self.config.static_dir.join(&st.source_file);
            match std::fs::read(&path) {
                Ok(bytes) => {
                    out.insert(st.source_file.clone(), sha256_hex(&bytes));
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(CliError::io(&path, e)),
            }
        }
        Ok(out)
    }

    pub fn provider_config(&self) -> Result<ProviderConfig, CliError> {
        Ok(ProviderConfig {
            provider: self.config.provider.clone(),
            region: self.config.region.clone(),
            bucket: self.config.bucket.clone(),
            static_root: relative(&self.config.static_dir, &self.config.out_dir),
            memory_mb: self.config.memory_mb,
            static_digests: self.static_digests()?,
            ..ProviderConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(relative(Path::new("/p/static"), Path::new("/p/deploy")), "../static");
        assert_eq!(relative(Path::new("/p/src/a.kls"), Path::new("/p")), "src/a.kls");
        assert_eq!(relative(Path::new("/p"), Path::new("/p")), ".");
    }

    #[test]
    fn digest_format() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
