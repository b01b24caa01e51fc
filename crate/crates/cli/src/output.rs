//! Manifests and output directories.

use std::path::{Path, PathBuf};
use std::process::Command;

use cmfp_core::io::{content_hash, write_json};
use cmfp_core::Environment;
use serde::Serialize;
use serde_json::Value;

use crate::config::Resolved;
use crate::CliError;

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// Hash of the resolved configuration, excluding output paths.
    pub config_hash: String,
    pub seed: u64,
    /// Derived seeds actually used, by purpose.
    pub seeds: Value,
    pub environment: &'a Environment,
    pub replica_environment: Option<&'a Environment>,
    pub git_describe: String,
    pub config: &'a Resolved,
    pub cache: Value,
    pub outputs: Vec<String>,
    /// Headline numbers of the run.
    pub reported: Value,
}

pub fn config_hash(resolved: &Resolved) -> Result<String, CliError> {
    let mut v = serde_json::to_value(resolved).expect("resolved config serializes");
    if let Value::Object(map) = &mut v {
        map.remove("out");
        map.remove("cache_dir");
    }
    Ok(content_hash(&v)?)
}

/// `git describe --always --dirty` of the working directory, or `unknown`.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'static str, resolved: &'a Resolved) -> Result<Self, CliError> {
        Ok(Self {
            tool: "cmfp",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash: config_hash(resolved)?,
            seed: resolved.seed,
            seeds: Value::Null,
            environment: &resolved.scenario.environment,
            replica_environment: resolved.scenario.replica_environment.as_ref(),
            git_describe: git_describe(),
            config: resolved,
            cache: Value::Null,
            outputs: Vec::new(),
            reported: Value::Null,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}
