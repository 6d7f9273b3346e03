//! The `infraloom` command line.
//!
//! Exit codes: 0 success, 1 invalid input (usage, config, parse, validation,
//! workload), 2 I/O failure or port in use, 3 terraform not found,
//! 4 terraform reported failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod project;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "infraloom",
    version,
    about = "Annotated declarations to Terraform and a local emulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Project configuration file.
    #[arg(long, default_value = "infraloom.conf")]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Write main.tf, policy.txt and schema.json.
    Synth(ConfigArg),
    /// Write bundle.zip and manifest.json.
    Bundle(ConfigArg),
    /// Run terraform on the synthesized output.
    Deploy {
        #[command(flatten)]
        config: ConfigArg,
        /// Only run `terraform validate` (the default).
        #[arg(long, conflicts_with = "apply")]
        dry_run: bool,
        /// Run `terraform init` and `terraform apply`.
        #[arg(long)]
        apply: bool,
    },
    /// Serve the application locally with stub handlers.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        /// Port on 127.0.0.1; 0 picks a free one.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// `handler = response` file; `{param}` in a response is replaced by the argument.
        #[arg(long)]
        stubs: Option<PathBuf>,
        /// Replay newline-delimited JSON events from a file (`-` for stdin) instead of listening.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Run the warm-pool simulator on an `arrival_ms,concurrency` CSV.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        workload: PathBuf,
    },
    /// Estimate the monthly bill from a pricing file.
    Estimate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        pricing: PathBuf,
    },
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Synth(c) => commands::synth(&c.config).map(drop),
        Cmd::Bundle(c) => commands::bundle(&c.config).map(drop),
        Cmd::Deploy { config, apply, .. } => commands::deploy(&config.config, !apply),
        Cmd::Serve {
            config,
            port,
            stubs,
            events,
        } => commands::serve_cmd(&config.config, port, stubs.as_deref(), events.as_deref()),
        Cmd::Simulate { config, workload } => commands::simulate(&config.config, &workload),
        Cmd::Estimate { config, pricing } => commands::estimate(&config.config, &pricing),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            for line in e.to_string().lines() {
                eprintln!("error: {line}");
            }
            e.exit_code()
        }
    }
}
