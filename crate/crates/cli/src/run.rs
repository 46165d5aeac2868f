//! Writing reports, CSVs and manifests, and re-running from a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{parse_config, ExperimentConfig};
use crate::experiments::{run_experiment, Check, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSeed {
    pub label: String,
    pub chain: usize,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    /// SHA-256 of the resolved config serialized as compact JSON.
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub chain_seeds: Vec<ChainSeed>,
    pub outputs: Vec<OutputFile>,
    pub config: ExperimentConfig,
}

#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    latgauge_core::seed::hex(&Sha256::digest(bytes))
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

/// Runs `cfg` and writes `report.json`, `manifest.json`, `config.json` and
/// the experiment's CSV files to `out_dir`.
pub fn run(cfg: &ExperimentConfig, warnings: &[String], out_dir: &Path) -> Result<Outcome, RunError> {
    fs::create_dir_all(out_dir)?;
    let started = chrono::Utc::now().to_rfc3339();
    let output = run_experiment(cfg)?;
    let finished = chrono::Utc::now().to_rfc3339();

    let mut outputs = Vec::new();
    for (name, text) in &output.csvs {
        fs::write(out_dir.join(name), text)?;
        outputs.push(OutputFile {
            file: name.clone(),
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    for (name, bytes) in &output.binaries {
        fs::write(out_dir.join(name), bytes)?;
        outputs.push(OutputFile {
            file: name.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    let config_text = serde_json::to_string_pretty(cfg)?;
    fs::write(out_dir.join("config.json"), &config_text)?;

    let manifest = RunManifest {
        experiment: cfg.experiment.to_string(),
        config_hash: config_hash(cfg),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished,
        chain_seeds: output
            .chain_seeds
            .iter()
            .map(|(label, chain, key)| ChainSeed {
                label: label.clone(),
                chain: *chain,
                key: key.clone(),
            })
            .collect(),
        outputs,
        config: cfg.clone(),
    };
    let passed = output.checks.iter().filter(|c| c.gating).all(|c| c.passed);
    let report = json!({
        "experiment": cfg.experiment,
        "passed": passed,
        "checks": output.checks,
        "warnings": warnings,
        "results": output.results,
        "config": cfg,
        "manifest": manifest,
    });
    fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(Outcome {
        passed,
        checks: output.checks,
        manifest,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Comparison of a rerun against the manifest it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RerunReport {
    pub identical: bool,
    pub version_matches: bool,
    /// `(file, expected hash, actual hash)` for every mismatch.
    pub mismatches: Vec<(String, String, Option<String>)>,
}

/// Re-executes the config embedded in a manifest into `out_dir` and
/// compares every output hash.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<RerunReport, RunError> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let cfg_text = serde_json::to_string(&manifest.config)?;
    let parsed = parse_config(&cfg_text)?;
    if config_hash(&parsed.config) != manifest.config_hash {
        return Err(RunError::Other("manifest config does not match its hash".into()));
    }
    let outcome = run(&parsed.config, &parsed.warnings, out_dir)?;
    let mut mismatches = Vec::new();
    for expected in &manifest.outputs {
        let actual = outcome
            .manifest
            .outputs
            .iter()
            .find(|o| o.file == expected.file)
            .map(|o| o.sha256.clone());
        if actual.as_deref() != Some(expected.sha256.as_str()) {
            mismatches.push((expected.file.clone(), expected.sha256.clone(), actual));
        }
    }
    Ok(RerunReport {
        identical: mismatches.is_empty() && outcome.manifest.outputs.len() == manifest.outputs.len(),
        version_matches: manifest.code_version == outcome.manifest.code_version,
        mismatches,
    })
}
