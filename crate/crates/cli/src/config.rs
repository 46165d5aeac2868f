//! Experiment configuration: JSON documents with `--set` overrides.

use std::fmt;
use std::path::PathBuf;

use latgauge_core::analysis::beta_threshold;
use latgauge_core::group::{Family, GroupSpec};
use latgauge_core::sigma::{BoundaryEnsemble, SigmaKernel};
use latgauge_core::ym::Algorithm;
use latgauge_core::ChainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Largest lattice accepted, in links.
pub const MAX_LINKS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Thresholds,
    SampleYm,
    Wilson,
    AreaFit,
    SigmaCov,
    OnePoint,
    HessianCheck,
    DisintegrationTest,
    Coupling,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Thresholds,
        Experiment::SampleYm,
        Experiment::Wilson,
        Experiment::AreaFit,
        Experiment::SigmaCov,
        Experiment::OnePoint,
        Experiment::HessianCheck,
        Experiment::DisintegrationTest,
        Experiment::Coupling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Thresholds => "thresholds",
            Experiment::SampleYm => "sample-ym",
            Experiment::Wilson => "wilson",
            Experiment::AreaFit => "area-fit",
            Experiment::SigmaCov => "sigma-cov",
            Experiment::OnePoint => "one-point",
            Experiment::HessianCheck => "hessian-check",
            Experiment::DisintegrationTest => "disintegration-test",
            Experiment::Coupling => "coupling",
        }
    }

    /// Experiments that run the slab σ-model on the `(d-1)`-dimensional slice.
    pub fn is_sigma(self) -> bool {
        matches!(
            self,
            Experiment::SigmaCov
                | Experiment::OnePoint
                | Experiment::DisintegrationTest
                | Experiment::Coupling
        )
    }

    pub fn is_ym(self) -> bool {
        matches!(self, Experiment::SampleYm | Experiment::Wilson | Experiment::AreaFit)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub family: Family,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
}

impl GroupConfig {
    pub fn spec(&self) -> Result<GroupSpec, String> {
        GroupSpec::new(self.family, self.n).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub sweeps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chains: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub ensemble: BoundaryEnsemble,
    #[serde(default = "one")]
    pub draws: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianSection {
    #[serde(default = "default_hessian_groups")]
    pub groups: Vec<GroupConfig>,
    #[serde(default = "default_hessian_m")]
    pub m: Vec<usize>,
    #[serde(default = "default_hessian_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_hessian_trials")]
    pub trials: usize,
}

fn default_hessian_groups() -> Vec<GroupConfig> {
    vec![
        GroupConfig { family: Family::SU, n: 2 },
        GroupConfig { family: Family::SU, n: 3 },
        GroupConfig { family: Family::SO, n: 4 },
    ]
}

fn default_hessian_m() -> Vec<usize> {
    vec![1, 2]
}

fn default_hessian_betas() -> Vec<f64> {
    vec![0.02, 0.05]
}

fn default_hessian_trials() -> usize {
    1000
}

impl Default for HessianSection {
    fn default() -> Self {
        Self {
            groups: default_hessian_groups(),
            m: default_hessian_m(),
            betas: default_hessian_betas(),
            trials: default_hessian_trials(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Scale of the initial displacement `exp(separation X) Q`.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Repeat with `dt / 2` to check the rate is stable.
    #[serde(default)]
    pub check_half_step: bool,
}

fn default_dt() -> f64 {
    0.005
}
fn default_horizon() -> f64 {
    1.0
}
fn default_pairs() -> usize {
    100
}
fn default_separation() -> f64 {
    0.1
}
fn default_record_every() -> usize {
    20
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            pairs: default_pairs(),
            separation: default_separation(),
            record_every: default_record_every(),
            check_half_step: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_threshold_d")]
    pub d: Vec<usize>,
    #[serde(default = "default_threshold_betas")]
    pub betas: Vec<f64>,
}

fn default_n_max() -> usize {
    6
}
fn default_threshold_d() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_threshold_betas() -> Vec<f64> {
    vec![0.0, 0.01, 0.02, 0.05]
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            n_max: default_n_max(),
            d: default_threshold_d(),
            betas: default_threshold_betas(),
        }
    }
}

/// A complete experiment description. Unknown keys are rejected at every
/// level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub group: GroupConfig,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub beta: f64,
    pub chain: ChainSection,
    pub seed: u64,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    /// Rectangles `[R, T]` for `wilson` and `area-fit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loops: Option<Vec<[usize; 2]>>,
    /// Also measure loops with the conditional-mean estimator.
    #[serde(default)]
    pub improved: bool,
    /// Slice distances for `sigma-cov`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<BoundarySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<SigmaKernel>,
    /// Base vertex of σ-model observables.
    #[serde(default)]
    pub x0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hessian: Option<HessianSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdSection>,
    /// Write a checkpoint of chain 0 (`sample-ym`).
    #[serde(default)]
    pub checkpoint: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Auto
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bad override `{arg}`: {message}")]
    Override { arg: String, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

impl ConfigError {
    pub fn problems(&self) -> &[String] {
        match self {
            ConfigError::Validation(p) => p,
            _ => &[],
        }
    }
}

fn parse_error(e: serde_json::Error) -> ConfigError {
    ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Applies `key.path=value` overrides to a JSON document. Values are parsed
/// as JSON and fall back to plain strings.
pub fn apply_overrides(doc: &mut Value, sets: &[String]) -> Result<(), ConfigError> {
    for arg in sets {
        let (key, raw) = arg.split_once('=').ok_or_else(|| ConfigError::Override {
            arg: arg.clone(),
            message: "expected key=value".into(),
        })?;
        if key.is_empty() {
            return Err(ConfigError::Override {
                arg: arg.clone(),
                message: "empty key".into(),
            });
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cur = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            let obj = cur.as_object_mut().ok_or_else(|| ConfigError::Override {
                arg: arg.clone(),
                message: format!("`{}` is not a table", parts[..k].join(".")),
            })?;
            if k + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            cur = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Result of parsing: the validated config plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

/// Parses and validates a JSON document with defaults filled in.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    parse_config_with(text, None, &[])
}

/// As [`parse_config`], with the experiment taken from the command line
/// (when the document does not name one) and `--set` overrides applied.
pub fn parse_config_with(
    text: &str,
    experiment: Option<Experiment>,
    sets: &[String],
) -> Result<ParsedConfig, ConfigError> {
    let mut doc: Value = serde_json::from_str(text).map_err(parse_error)?;
    if !doc.is_object() {
        return Err(ConfigError::Parse {
            line: 1,
            column: 1,
            message: "top level must be a JSON object".into(),
        });
    }
    apply_overrides(&mut doc, sets)?;
    if let Some(e) = experiment {
        let named = doc.get("experiment").cloned();
        match named {
            None => {
                doc["experiment"] = Value::String(e.name().into());
            }
            Some(v) if v != Value::String(e.name().into()) => {
                return Err(ConfigError::Validation(vec![format!(
                    "command line asks for `{e}` but the config names {v}"
                )]));
            }
            Some(_) => {}
        }
    }
    let untouched = sets.is_empty() && doc.get("experiment").is_some() && experiment.is_none();
    let mut config: ExperimentConfig = serde_json::from_value(doc).map_err(|e| {
        // the raw text gives line numbers when nothing was overridden
        match (untouched, locate(text)) {
            (true, Some(located)) => located,
            _ => ConfigError::Parse {
                line: 0,
                column: 0,
                message: e.to_string(),
            },
        }
    })?;
    config.fill_defaults();
    let warnings = config.validate()?;
    Ok(ParsedConfig { config, warnings })
}

/// Re-parses text so that errors carry line numbers even for type errors.
pub fn locate(text: &str) -> Option<ConfigError> {
    serde_json::from_str::<ExperimentConfig>(text).err().map(parse_error)
}

impl ExperimentConfig {
    /// burn_in = 20% of sweeps, thinning = 1, four chains; experiment
    /// tables get their documented defaults.
    pub fn fill_defaults(&mut self) {
        let c = &mut self.chain;
        c.burn_in.get_or_insert(c.sweeps / 5);
        c.thinning.get_or_insert(1);
        c.n_chains.get_or_insert(4);
        match self.experiment {
            Experiment::HessianCheck => {
                self.hessian.get_or_insert_with(HessianSection::default);
            }
            Experiment::Coupling => {
                self.coupling.get_or_insert_with(CouplingSection::default);
            }
            Experiment::Thresholds => {
                self.thresholds.get_or_insert_with(ThresholdSection::default);
            }
            _ => {}
        }
        if self.experiment.is_sigma() {
            self.boundaries.get_or_insert_with(|| {
                vec![BoundarySpec {
                    ensemble: BoundaryEnsemble::Haar,
                    draws: 1,
                }]
            });
            self.kernel.get_or_insert(SigmaKernel::Sampler {
                algorithm: Algorithm::Auto,
            });
        }
    }

    pub fn chain_config(&self) -> ChainConfig {
        let c = &self.chain;
        ChainConfig {
            sweeps: c.sweeps,
            burn_in: c.burn_in.unwrap_or(c.sweeps / 5),
            thinning: c.thinning.unwrap_or(1),
            n_chains: c.n_chains.unwrap_or(4),
            seed: self.seed,
        }
    }

    pub fn spec(&self) -> GroupSpec {
        self.group.spec().expect("validated")
    }

    pub fn loops(&self) -> Vec<(usize, usize)> {
        self.loops
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|&[r, t]| (r, t))
            .collect()
    }

    /// Checks every documented range and returns warnings; all violated
    /// constraints are reported together.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut bad = Vec::new();
        let mut warn = Vec::new();
        let e = self.experiment;

        let spec = match self.group.spec() {
            Ok(s) => Some(s),
            Err(msg) => {
                bad.push(format!("group: {msg}"));
                None
            }
        };
        if self.group.n > 16 {
            bad.push(format!("group.N = {} exceeds 16", self.group.n));
        }
        if !(2..=8).contains(&self.d) {
            bad.push(format!("d = {} outside [2, 8]", self.d));
        }
        if self.side < 2 {
            bad.push(format!("L = {} must be at least 2", self.side));
        }
        if (2..=8).contains(&self.d) && self.side >= 2 {
            let links = (self.side as u128).pow(self.d as u32) * self.d as u128;
            if links > MAX_LINKS as u128 {
                bad.push(format!("lattice L^d * d = {links} links exceeds {MAX_LINKS}"));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            bad.push(format!("beta = {} must be finite and >= 0", self.beta));
        }

        let c = &self.chain;
        if c.sweeps == 0 {
            bad.push("chain.sweeps must be >= 1".into());
        }
        if let Some(b) = c.burn_in {
            if b >= c.sweeps {
                bad.push(format!("chain.burn_in = {b} must be < chain.sweeps = {}", c.sweeps));
            }
        }
        if c.thinning == Some(0) {
            bad.push("chain.thinning must be >= 1".into());
        }
        match c.n_chains {
            Some(0) => bad.push("chain.n_chains must be >= 1".into()),
            Some(n) if n > 1024 => bad.push(format!("chain.n_chains = {n} exceeds 1024")),
            _ => {}
        }

        let half = self.side / 2;
        if let Some(loops) = &self.loops {
            for &[r, t] in loops {
                if r == 0 || t == 0 || r > half || t > half {
                    bad.push(format!("loop {r}x{t}: sides must lie in [1, L/2 = {half}]"));
                }
            }
        }
        match e {
            Experiment::Wilson if self.loops.as_ref().is_none_or(|l| l.is_empty()) => {
                bad.push("wilson needs a non-empty `loops` list".into());
            }
            Experiment::AreaFit if self.loops.as_ref().is_none_or(|l| l.len() < 3) => {
                bad.push("area-fit needs at least 3 loops".into());
            }
            _ => {}
        }
        if let Some(ds) = &self.distances {
            for &r in ds {
                if r == 0 || r > half {
                    bad.push(format!("distance {r} outside [1, L/2 = {half}]"));
                }
            }
        }
        if e == Experiment::SigmaCov && self.distances.as_ref().is_none_or(|d| d.len() < 3) {
            bad.push("sigma-cov needs at least 3 distances".into());
        }
        if e.is_sigma() && (2..=8).contains(&self.d) && self.side >= 2 {
            let nv = (self.side as u128).pow(self.d as u32 - 1);
            if self.x0 as u128 >= nv {
                bad.push(format!("x0 = {} outside the slice's {nv} vertices", self.x0));
            }
        }
        if let Some(bs) = &self.boundaries {
            if bs.is_empty() {
                bad.push("boundaries must not be empty".into());
            }
            for b in bs {
                if b.draws == 0 {
                    bad.push("boundaries[].draws must be >= 1".into());
                }
            }
        }
        if let Some(SigmaKernel::Langevin { dt, steps_per_sweep }) = self.kernel {
            if !(dt > 0.0 && dt <= latgauge_core::sigma::MAX_DT) {
                bad.push(format!("kernel.dt = {dt} outside (0, {}]", latgauge_core::sigma::MAX_DT));
            }
            if steps_per_sweep == 0 {
                bad.push("kernel.steps_per_sweep must be >= 1".into());
            }
        }
        if let Some(h) = &self.hessian {
            if h.trials == 0 {
                bad.push("hessian.trials must be >= 1".into());
            }
            for &m in &h.m {
                if !(1..=3).contains(&m) {
                    bad.push(format!("hessian.m = {m} outside [1, 3]"));
                }
            }
            for &b in &h.betas {
                if !(b.is_finite() && b >= 0.0) {
                    bad.push(format!("hessian.betas: {b} must be finite and >= 0"));
                }
            }
            for g in &h.groups {
                if let Err(msg) = g.spec() {
                    bad.push(format!("hessian.groups: {msg}"));
                }
            }
            if h.groups.is_empty() || h.m.is_empty() || h.betas.is_empty() {
                bad.push("hessian.groups, hessian.m and hessian.betas must be non-empty".into());
            }
        }
        if let Some(cp) = &self.coupling {
            if !(cp.dt > 0.0 && cp.dt <= 0.01) {
                bad.push(format!("coupling.dt = {} outside (0, 0.01]", cp.dt));
            }
            if !(cp.horizon > 0.0 && cp.horizon.is_finite()) {
                bad.push(format!("coupling.horizon = {} must be positive", cp.horizon));
            }
            if cp.pairs == 0 {
                bad.push("coupling.pairs must be >= 1".into());
            }
            if cp.record_every == 0 {
                bad.push("coupling.record_every must be >= 1".into());
            } else if cp.dt > 0.0 && (cp.horizon / cp.dt) < 3.0 * cp.record_every as f64 {
                bad.push("coupling: horizon / dt must cover at least 3 record intervals".into());
            }
            if !(cp.separation >= 0.0 && cp.separation.is_finite()) {
                bad.push(format!("coupling.separation = {} must be >= 0", cp.separation));
            }
        }
        if let Some(t) = &self.thresholds {
            if !(2..=16).contains(&t.n_max) {
                bad.push(format!("thresholds.n_max = {} outside [2, 16]", t.n_max));
            }
            for &d in &t.d {
                if !(2..=8).contains(&d) {
                    bad.push(format!("thresholds.d: {d} outside [2, 8]"));
                }
            }
        }

        if let Some(spec) = spec {
            let heat_ok = matches!((spec.family(), spec.n()), (Family::SU, 2) | (Family::U, 1));
            if self.algorithm == Algorithm::HeatBath && !heat_ok && (e.is_ym() || e.is_sigma()) {
                bad.push(format!("heat bath is only available for SU(2) and U(1), not {spec}"));
            }
            if let Some(SigmaKernel::Sampler { algorithm: Algorithm::HeatBath }) = self.kernel {
                if !heat_ok {
                    bad.push(format!("kernel heat bath is only available for SU(2) and U(1), not {spec}"));
                }
            }
            if e == Experiment::DisintegrationTest && spec.family() != Family::U {
                bad.push(format!("disintegration-test needs a U(N) group, got {spec}"));
            }
            if e == Experiment::DisintegrationTest && spec.n() < 2 {
                bad.push("disintegration-test needs N >= 2".into());
            }
            if self.improved && !heat_ok && e.is_ym() {
                warn.push(format!(
                    "improved estimator not available for {spec}; plain loops are used"
                ));
            }
            if (e.is_ym() || e.is_sigma()) && (2..=8).contains(&self.d) {
                let star = beta_threshold(spec.family(), spec.n(), self.d);
                if self.beta >= star {
                    warn.push(format!(
                        "beta = {} is at or above the threshold beta* = {star} for {spec}, d = {}",
                        self.beta, self.d
                    ));
                }
            }
        }
        if bad.is_empty() {
            Ok(warn)
        } else {
            Err(ConfigError::Validation(bad))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "sample-ym",
        "group": {"family": "SU", "N": 2},
        "d": 2, "L": 4, "beta": 0.05,
        "chain": {"sweeps": 100},
        "seed": 1
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let p = parse_config(MINIMAL).unwrap();
        let c = p.config.chain_config();
        assert_eq!((c.burn_in, c.thinning, c.n_chains), (20, 1, 4));
        assert_eq!(p.config.algorithm, Algorithm::Auto);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_location() {
        let text = MINIMAL.replace("\"seed\": 1", "\"seed\": 1,\n \"sed\": 2");
        match parse_config(&text) {
            Err(ConfigError::Parse { message, .. }) => assert!(message.contains("sed"), "{message}"),
            other => panic!("{other:?}"),
        }
        match locate(&text) {
            Some(ConfigError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        let nested = MINIMAL.replace("\"sweeps\": 100", "\"sweeps\": 100, \"burnin\": 3");
        assert!(matches!(parse_config(&nested), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "{\n  \"experiment\": \"wilson\",\n  oops\n}";
        match parse_config(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    fn problems(text: &str, sets: &[&str]) -> Vec<String> {
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        match parse_config_with(text, None, &sets) {
            Err(ConfigError::Validation(p)) => p,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn su1_is_rejected() {
        let p = problems(MINIMAL, &["group.N=1"]);
        assert!(p[0].contains("SU(1)"), "{p:?}");
    }

    #[test]
    fn rectangle_longer_than_half_the_lattice_is_rejected() {
        let p = problems(MINIMAL, &["experiment=wilson", "loops=[[1,1],[3,1]]"]);
        assert_eq!(p.len(), 1, "{p:?}");
        assert!(p[0].contains("3x1"));
    }

    #[test]
    fn every_violation_is_listed() {
        let p = problems(
            MINIMAL,
            &["d=1", "L=1", "beta=-1", "chain.thinning=0", "chain.n_chains=0", "chain.burn_in=500"],
        );
        assert_eq!(p.len(), 6, "{p:?}");
    }

    #[test]
    fn rejection_covers_each_documented_range() {
        let cases: &[&[&str]] = &[
            &["group.N=0"],
            &["group.N=17"],
            &["d=9"],
            &["L=1"],
            &["d=8", "L=64"],
            &["beta=-0.1"],
            &["chain.sweeps=0"],
            &["chain.burn_in=100"],
            &["chain.thinning=0"],
            &["chain.n_chains=0"],
            &["chain.n_chains=2000"],
            &["experiment=wilson"],
            &["experiment=wilson", "loops=[[0,1]]"],
            &["experiment=area-fit", "loops=[[1,1],[1,2]]"],
            &["experiment=sigma-cov", "distances=[1,2]"],
            &["experiment=sigma-cov", "distances=[1,2,3]"],
            &["experiment=one-point", "x0=99"],
            &["experiment=one-point", "boundaries=[]"],
            &["experiment=one-point", "boundaries=[{\"ensemble\":\"haar\",\"draws\":0}]"],
            &["experiment=one-point", "kernel={\"kind\":\"langevin\",\"dt\":0.5,\"steps_per_sweep\":1}"],
            &["experiment=one-point", "kernel={\"kind\":\"langevin\",\"dt\":0.01,\"steps_per_sweep\":0}"],
            &["experiment=hessian-check", "hessian.trials=0"],
            &["experiment=hessian-check", "hessian.m=[4]"],
            &["experiment=hessian-check", "hessian.betas=[-1]"],
            &["experiment=hessian-check", "hessian.groups=[{\"family\":\"SU\",\"N\":1}]"],
            &["experiment=hessian-check", "hessian.m=[]"],
            &["experiment=coupling", "coupling.dt=0.02"],
            &["experiment=coupling", "coupling.horizon=0"],
            &["experiment=coupling", "coupling.pairs=0"],
            &["experiment=coupling", "coupling.record_every=0"],
            &["experiment=coupling", "coupling.record_every=1000"],
            &["experiment=coupling", "coupling.separation=-1"],
            &["experiment=thresholds", "thresholds.n_max=1"],
            &["experiment=thresholds", "thresholds.d=[9]"],
            &["group.family=SO", "group.N=3", "algorithm=heat-bath"],
            &["experiment=disintegration-test"],
            &["experiment=disintegration-test", "group.family=U", "group.N=1"],
        ];
        for sets in cases {
            let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
            let r = parse_config_with(MINIMAL, None, &sets);
            assert!(matches!(r, Err(ConfigError::Validation(_))), "{sets:?}: {r:?}");
        }
    }

    #[test]
    fn beta_above_threshold_only_warns() {
        let sets = vec!["beta=0.2".to_string()];
        let p = parse_config_with(MINIMAL, None, &sets).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("threshold"));
    }

    #[test]
    fn overrides_create_nested_tables_and_parse_values() {
        let mut doc: Value = serde_json::from_str(MINIMAL).unwrap();
        apply_overrides(
            &mut doc,
            &["coupling.dt=0.002".into(), "group.family=SO".into(), "improved=true".into()],
        )
        .unwrap();
        assert_eq!(doc["coupling"]["dt"], 0.002);
        assert_eq!(doc["group"]["family"], "SO");
        assert_eq!(doc["improved"], true);
        assert!(apply_overrides(&mut doc, &["novalue".into()]).is_err());
        assert!(apply_overrides(&mut doc, &["beta.x=1".into()]).is_err());
    }

    #[test]
    fn command_line_experiment_must_agree() {
        let r = parse_config_with(MINIMAL, Some(Experiment::Wilson), &[]);
        assert!(matches!(r, Err(ConfigError::Validation(_))));
        let text = MINIMAL.replace("\"experiment\": \"sample-ym\",", "");
        let p = parse_config_with(&text, Some(Experiment::SampleYm), &[]).unwrap();
        assert_eq!(p.config.experiment, Experiment::SampleYm);
    }

    #[test]
    fn resolved_config_round_trips() {
        let p = parse_config(MINIMAL).unwrap();
        let text = serde_json::to_string_pretty(&p.config).unwrap();
        assert_eq!(parse_config(&text).unwrap().config, p.config);
    }
}
