//! On-disk documents and the write path shared by all commands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use riskplan_core::synth::{PolicyEntry, SolutionDump};
use riskplan_core::SCHEMA_VERSION;

use crate::args::Command;
use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("documents serialize");
    v.push(b'\n');
    v
}

/// Writes `bytes` through a temporary file in the same directory, so the
/// target either keeps its old content or gets the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Output files of one command, held in memory until everything succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, relative: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((relative.into(), bytes));
    }

    pub fn entries(&self) -> Vec<OutputEntry> {
        self.files
            .iter()
            .map(|(p, b)| OutputEntry {
                path: p.to_string_lossy().replace('\\', "/"),
                sha256: sha256_hex(b),
                bytes: b.len(),
            })
            .collect()
    }

    pub fn write_all(&self, out: &Path) -> Result<(), CliError> {
        for (p, b) in &self.files {
            write_atomic(&out.join(p), b)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one run. The invocation is stored with absolute input paths;
/// everything but `timings_ms` is reproduced exactly by `replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub invocation: Command,
    pub scenario: Option<ScenarioRef>,
    /// Settings that differ from the scenario file.
    pub overrides: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub timings_ms: BTreeMap<String, f64>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(invocation: Command, scenario: Option<ScenarioRef>) -> RunManifest {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool_version: riskplan_core::VERSION.to_string(),
            invocation,
            scenario,
            overrides: BTreeMap::new(),
            seed: None,
            timings_ms: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }
}

pub const MANIFEST: &str = "manifest.json";

/// A synthesized policy, tied to the scenario file it was made for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub schema_version: u32,
    pub scenario_sha256: String,
    pub gamma: f64,
    pub r_th: Option<f64>,
    pub relaxed: bool,
    /// LP-reported values, compared against exact evaluation by `evaluate`.
    pub objective: f64,
    pub risk: f64,
    pub actions: Vec<String>,
    pub num_states: usize,
    pub policy: Vec<PolicyEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub scenario_sha256: String,
    #[serde(flatten)]
    pub solution: SolutionDump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub reward: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub n: usize,
    pub seed: u64,
    pub horizon: usize,
    pub reward_mean: f64,
    pub reward_stderr: f64,
    pub risk_mean: f64,
    pub risk_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub scenario_sha256: String,
    pub gamma: f64,
    pub r_th: Option<f64>,
    pub lp: Pair,
    pub oracle: Pair,
    /// |oracle - lp| per metric.
    pub abs_diff: Pair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollout: Option<RolloutReport>,
}
