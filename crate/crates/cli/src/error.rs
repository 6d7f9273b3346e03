use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", .file.display())]
    Config {
        file: PathBuf,
        line: usize,
        message: String,
    },
    /// Parse and validation errors, already formatted as `file:line: ...`.
    #[error("{}", .0.join("\n"))]
    Diagnostics(Vec<String>),
    #[error("{0}")]
    Synth(String),
    #[error("MissingStaticFile({0})")]
    MissingStaticFile(String),
    #[error("malformed workload: {0}")]
    Workload(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} not found; run `infraloom synth` first", .0.display())]
    MissingArtifact(PathBuf),
    #[error("{0}")]
    Bind(String),
    #[error("{0}")]
    TerraformMissing(String),
    #[error("{0}")]
    TerraformFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1: invalid input; 2: I/O or network; 3: no terraform; 4: terraform failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. }
            | Self::Diagnostics(_)
            | Self::Synth(_)
            | Self::MissingStaticFile(_)
            | Self::Workload(_) => 1,
            Self::Io { .. } | Self::MissingArtifact(_) | Self::Bind(_) => 2,
            Self::TerraformMissing(_) => 3,
            Self::TerraformFailed(_) => 4,
        }
    }
}
