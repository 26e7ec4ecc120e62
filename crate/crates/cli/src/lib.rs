//! Library surface of the `symq` experiment runner, kept separate from the
//! binary so integration tests can drive configs in-process.

// `!(x > 0.0)`-style validation is used throughout on purpose: unlike
// `x <= 0.0`, it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;

pub use config::{resolve, ConfigReport, ExperimentKind, RawConfig, Resolved};
pub use runner::{run, RunReport};

use std::path::{Path, PathBuf};

/// Errors split by exit code: config problems exit 2, runtime failures 1.
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(msg) => write!(f, "{msg}"),
            AppError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Runtime(_) => 1,
        }
    }
}

/// Parses a config file; JSON errors come back with line and column.
pub fn load_raw(path: &Path) -> Result<RawConfig, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        AppError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// `symq run`: load, validate, execute.
pub fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<RunReport, AppError> {
    init_threads(threads);
    let raw = load_raw(path)?;
    let resolved = resolve(&raw, seed, out).map_err(|report| AppError::Config(report.to_string()))?;
    runner::run(&resolved).map_err(|e| AppError::Runtime(format!("{e:#}")))
}

/// `symq validate`: full schema plus semantic validation, no execution.
pub fn cmd_validate(path: &Path) -> Result<(), AppError> {
    let raw = load_raw(path)?;
    resolve(&raw, None, None)
        .map(|_| ())
        .map_err(|report| AppError::Config(report.to_string()))
}

/// Sizes the global rayon pool once; later calls are ignored (rayon pools
/// cannot be resized after first use).
pub fn init_threads(threads: Option<usize>) {
    let n = threads.or_else(|| {
        std::env::var("SYMQ_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
