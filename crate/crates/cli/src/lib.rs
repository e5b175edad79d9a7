//! Named, reproducible experiment pipelines over `sedqm-core`.
//!
//! A run reads a [`RunConfig`], writes plot-ready CSV into an output
//! directory and closes with `manifest.json`, which lists every output file,
//! the scalar diagnostics and the acceptance checks. Wall-clock times go to
//! `timings.json` so that reruns with the same seed reproduce the manifest
//! byte for byte.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::path::{Path, PathBuf};

pub use config::{ConfigError, Experiment, RunConfig};
pub use manifest::{Check, Manifest, Recorder, StageError, Status};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "SEDQM_OUT_DIR";

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const ACCEPTANCE_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const RUNTIME_ERROR: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot prepare output directory {path}: {message}")]
    Output { path: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG_ERROR,
            RunError::Output { .. } => exit::RUNTIME_ERROR,
        }
    }
}

/// Exit code for a finished run.
pub fn exit_code(m: &Manifest) -> i32 {
    match m.status {
        Status::Pass => exit::PASS,
        Status::Fail => exit::ACCEPTANCE_FAILURE,
        Status::Error => exit::RUNTIME_ERROR,
    }
}

/// Default output directory when neither flag, environment nor config names one.
pub fn default_output_dir(e: Experiment) -> PathBuf {
    Path::new("runs").join(e.name())
}

/// Validate `config` and run its experiment into `out_dir`.
///
/// Stage failures still produce a manifest (with `status = "error"` and the
/// failing stage); only configuration and output-directory problems return
/// `Err`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<Manifest, RunError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| RunError::Output { path: out_dir.display().to_string(), message: e.to_string() })?;
    let mut rec = Recorder::new(out_dir.to_path_buf(), config);
    let failure = experiments::run(config, &mut rec).err();
    rec.finish(failure).map_err(|e| RunError::Output { path: out_dir.display().to_string(), message: e.to_string() })
}
