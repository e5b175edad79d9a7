//! Run manifest and the bookkeeping that fills it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sedqm_core::{io as grid_io, Grid1};
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nan_from_null")]
    pub value: f64,
    /// Human-readable acceptance condition.
    pub condition: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub status: Status,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub stages: Vec<String>,
    /// Non-finite values are written as `null`.
    #[serde(deserialize_with = "nan_map_from_null")]
    pub diagnostics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Output files relative to the run directory, in creation order.
    pub files: Vec<String>,
    /// Wall-clock times live in this file so the manifest stays reproducible.
    pub timings_file: String,
    pub config: RunConfig,
}

fn nan_from_null<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nan_map_from_null<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    let m = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

impl Manifest {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.get(name).copied()
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn read(dir: &Path) -> std::io::Result<Manifest> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Failure inside a named stage.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("stage `{stage}` failed: {message}")]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

/// Collects outputs, diagnostics and checks while an experiment runs.
pub struct Recorder {
    dir: PathBuf,
    manifest: Manifest,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    pub fn new(dir: PathBuf, config: &RunConfig) -> Self {
        Self {
            dir,
            manifest: Manifest {
                experiment: config.experiment.name().to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                status: Status::Pass,
                failed_stage: None,
                error: None,
                stages: Vec::new(),
                diagnostics: BTreeMap::new(),
                checks: Vec::new(),
                files: Vec::new(),
                timings_file: TIMINGS_FILE.to_string(),
                config: config.clone(),
            },
            timings: BTreeMap::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Run `f` as stage `name`, timing it and tagging any error with the stage.
    pub fn stage<T, E: std::fmt::Display>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, E>) -> Result<T, StageError> {
        let start = Instant::now();
        self.manifest.stages.push(name.to_string());
        let out = f(self);
        self.timings.insert(format!("{:02}-{name}", self.manifest.stages.len()), start.elapsed().as_secs_f64());
        out.map_err(|e| StageError { stage: name.to_string(), message: e.to_string() })
    }

    pub fn diagnostic(&mut self, name: &str, value: f64) {
        self.manifest.diagnostics.insert(name.to_string(), value);
    }

    /// Record an acceptance check.
    pub fn check(&mut self, name: &str, value: f64, condition: impl Into<String>, passed: bool) {
        self.manifest.checks.push(Check { name: name.to_string(), value, condition: condition.into(), passed: passed && !value.is_nan() });
    }

    /// `|value - target| <= tol`.
    pub fn check_near(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.check(name, value, format!("|value - {target}| <= {tol:e}"), (value - target).abs() <= tol);
    }

    /// `value <= bound`.
    pub fn check_below(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, format!("value <= {bound:e}"), value <= bound);
    }

    /// `value >= bound`.
    pub fn check_above(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, format!("value >= {bound:e}"), value >= bound);
    }

    fn register(&mut self, name: &str) -> PathBuf {
        self.manifest.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write_columns(&mut self, name: &str, header: &[&str], columns: &[&[f64]]) -> std::io::Result<()> {
        let path = self.register(name);
        grid_io::write_columns(&path, header, columns)
    }

    pub fn write_grid(&mut self, stem: &str, x: &Grid1, p: &Grid1, value_name: &str, values: &[f64]) -> std::io::Result<()> {
        let path = self.register(&format!("{stem}.csv"));
        grid_io::write_grid_csv(&path, x, p, value_name, values)
    }

    pub fn write_grid_binary(&mut self, stem: &str, x: &Grid1, p: &Grid1, values: &[f64]) -> std::io::Result<()> {
        let path = self.register(&format!("{stem}.bin"));
        grid_io::write_grid_binary(&path, x, p, values)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> std::io::Result<()> {
        let path = self.register(name);
        fs::write(path, text)
    }

    /// Close the run: mark the outcome and write the manifest and timings.
    pub fn finish(mut self, failure: Option<StageError>) -> std::io::Result<Manifest> {
        match failure {
            Some(e) => {
                self.manifest.status = Status::Error;
                self.manifest.failed_stage = Some(e.stage);
                self.manifest.error = Some(e.message);
            }
            None if self.manifest.checks.iter().any(|c| !c.passed) => self.manifest.status = Status::Fail,
            None => self.manifest.status = Status::Pass,
        }
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(self.dir.join(MANIFEST_FILE), json + "\n")?;
        let timings = serde_json::to_string_pretty(&self.timings).expect("timings serialize");
        fs::write(self.dir.join(TIMINGS_FILE), timings + "\n")?;
        Ok(self.manifest)
    }
}
