//! Command-line front end: `run`, `ct`, `safety`, `difftest`, `isa` and
//! `bench`.
//!
//! Exit codes: 0 on success (secure, safe, agreeing), 1 on a failed verdict
//! (insecure, unsafe, mismatch, failed run), 2 on usage, input or parse
//! errors.

mod cmd;
pub mod opts;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use thiserror::Error;

use crate::ir::{compile, TypedProgram};
use crate::primitives::{program_meta, program_source, ProgramMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Version of every JSON report.
pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
}

#[derive(Debug, Parser)]
#[command(name = "jamin", version, about = "Run, check and compare DSL programs")]
pub struct Cli {
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute an entry function.
    Run(RunArgs),
    /// Check constant-time behaviour by paired runs and taint inference.
    Ct(CtArgs),
    /// Compute the memory ranges an entry function may access.
    Safety(SafetyArgs),
    /// Compare programs against the specification and each other.
    Difftest(DiffArgs),
    /// List the instruction descriptors.
    Isa(IsaArgs),
    /// Count interpreter steps per message byte.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub entry: Option<String>,
    /// Scalar arguments in parameter order.
    #[arg(long = "u64", value_parser = opts::parse_u64, num_args = 1..)]
    pub args: Vec<u64>,
    /// Uninitialized region, `BASE:LEN`.
    #[arg(long)]
    pub region: Vec<String>,
    /// Initialized region, `BASE:HEX`.
    #[arg(long)]
    pub bytes: Vec<String>,
    /// Initial memory as a hex dump.
    #[arg(long)]
    pub mem_in: Option<PathBuf>,
    /// Write the final memory as a hex dump.
    #[arg(long)]
    pub mem_out: Option<PathBuf>,
    /// Print the leakage trace.
    #[arg(long)]
    pub trace: bool,
    /// Step budget.
    #[arg(long, default_value_t = 100_000_000)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct CtArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub entry: Option<String>,
    /// Public parameters and regions, comma separated.
    #[arg(long)]
    pub public: Option<String>,
    /// Secret region, `[NAME=]BASE:LEN`; a parameter named NAME points to it.
    #[arg(long)]
    pub secret_region: Vec<String>,
    /// Public region, `[NAME=]BASE:LEN`.
    #[arg(long)]
    pub public_region: Vec<String>,
    /// Scalar generator, `NAME=V` or `NAME=LO..HI`.
    #[arg(long)]
    pub range: Vec<String>,
    /// Largest length drawn by the corpus harness.
    #[arg(long, value_parser = opts::parse_u64)]
    pub max_len: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, value_parser = opts::parse_u64, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the witness inputs of an insecure verdict.
    #[arg(long)]
    pub witness_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SafetyArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub entry: Option<String>,
    /// Pointer parameters, comma separated.
    #[arg(long)]
    pub pointer: Option<String>,
    /// Scalar parameters kept symbolic, comma separated.
    #[arg(long)]
    pub track: Option<String>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// Programs from reference to most optimized.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub entry: Option<String>,
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub runs: u64,
    #[arg(long, value_parser = opts::parse_u64, default_value_t = 0)]
    pub seed: u64,
    /// Leave the specification out of the chain.
    #[arg(long)]
    pub no_spec: bool,
}

#[derive(Debug, Args)]
pub struct IsaArgs {
    /// List every descriptor.
    #[arg(long)]
    pub list: bool,
    /// Show one descriptor.
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Corpus program names.
    #[arg(required = true)]
    pub programs: Vec<String>,
    /// Message sizes in bytes, comma separated.
    #[arg(long, default_value = "0,64,256,1024,4096")]
    pub sizes: String,
    #[arg(long, default_value_t = 1)]
    pub reps: u32,
    #[arg(long, value_parser = opts::parse_u64, default_value_t = 0)]
    pub seed: u64,
}

/// What one invocation printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// A finished command: exit code, text report and JSON report.
pub(crate) struct Report {
    pub code: i32,
    pub text: String,
    pub json: Value,
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let msg = e.render().to_string();
            return if code == EXIT_OK {
                Output {
                    code,
                    stdout: msg,
                    stderr: String::new(),
                }
            } else {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: msg,
                }
            };
        }
    };
    let json = cli.json;
    let res = match cli.command {
        Command::Run(a) => cmd::run(a),
        Command::Ct(a) => cmd::ct(a),
        Command::Safety(a) => cmd::safety(a),
        Command::Difftest(a) => cmd::difftest(a),
        Command::Isa(a) => cmd::isa(a),
        Command::Bench(a) => cmd::bench(a),
    };
    match res {
        Ok(r) => Output {
            code: r.code,
            stdout: if json {
                let mut s = serde_json::to_string_pretty(&r.json).expect("JSON values serialize");
                s.push('\n');
                s
            } else {
                r.text
            },
            stderr: String::new(),
        },
        Err(e) => Output {
            code: EXIT_USAGE,
            stdout: if json {
                let v = serde_json::json!({
                    "schema_version": SCHEMA_VERSION,
                    "error": e.to_string(),
                });
                format!("{v}\n")
            } else {
                String::new()
            },
            stderr: format!("error: {e}\n"),
        },
    }
}

/// A loaded program and, for corpus files, its metadata.
pub(crate) struct Loaded {
    pub path: String,
    pub tp: TypedProgram,
    pub meta: Option<ProgramMeta>,
}

/// Reads `path`; a missing `corpus/<name>.jz` or bare `<name>` falls back
/// to the built-in corpus.
pub(crate) fn load(path: &Path) -> Result<Loaded, CliError> {
    let shown = path.display().to_string();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let meta = program_meta(&stem);
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let in_corpus = match path.parent().and_then(|p| p.file_name()) {
                None => true,
                Some(d) => d == "corpus",
            };
            match (&meta, in_corpus) {
                (Some(_), true) => program_source(&stem).map_err(|e| CliError::Io {
                    path: shown.clone(),
                    msg: e.to_string(),
                })?,
                _ => {
                    return Err(CliError::Io {
                        path: shown,
                        msg: e.to_string(),
                    })
                }
            }
        }
    };
    let tp = compile(&src).map_err(|e| CliError::Parse {
        path: shown.clone(),
        msg: e.to_string(),
    })?;
    Ok(Loaded {
        path: shown,
        tp,
        meta,
    })
}

impl Loaded {
    /// The requested entry, else the corpus entry, else the only export.
    pub fn entry(&self, requested: Option<&str>) -> Result<String, CliError> {
        let name = match requested {
            Some(e) => e.to_string(),
            None => match &self.meta {
                Some(m) => m.entry.to_string(),
                None => {
                    let exports: Vec<&str> = self
                        .tp
                        .program
                        .functions()
                        .filter(|f| f.kind == crate::ir::FnKind::Export)
                        .map(|f| f.name.as_str())
                        .collect();
                    match exports[..] {
                        [one] => one.to_string(),
                        _ => {
                            return Err(CliError::Usage(
                                "--entry is required when the file has no single export".into(),
                            ))
                        }
                    }
                }
            },
        };
        if self.tp.info(&name).is_none() {
            return Err(CliError::Usage(format!(
                "{}: no function `{name}`",
                self.path
            )));
        }
        Ok(name)
    }

    /// Metadata that applies to `entry`.
    pub fn meta_for(&self, entry: &str) -> Option<&ProgramMeta> {
        self.meta.as_ref().filter(|m| m.entry == entry)
    }

    pub fn params(&self, entry: &str) -> Vec<String> {
        self.tp
            .info(entry)
            .map(|i| i.sig.params.iter().map(|(n, _, _)| n.clone()).collect())
            .unwrap_or_default()
    }
}
