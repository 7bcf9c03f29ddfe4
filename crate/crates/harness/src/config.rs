//! Experiment configuration files.
//!
//! A config is TOML. Only `[problem] kind`, `topologies` and `algorithms`
//! are required; everything else falls back to the benchmark defaults.
//!
//! ```toml
//! algorithms = ["dp2g", "extra"]
//! seed = 1
//! repeat = 1
//!
//! [problem]
//! kind = "ridge"
//!
//! [[topologies]]
//! kind = "ring"
//!
//! [[topologies]]
//! kind = "grid"
//! rows = 4
//! cols = 5
//! ```
//!
//! Parsing fills every default in, so serializing a parsed config and
//! parsing it again yields the same value.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use consensus_core::dp2g::{Dp2gConfig, Schedules, StoppingMode};
use consensus_core::network::TopologyKind;
use consensus_core::objectives::{DataSpec, ProblemKind};
use consensus_core::record::Algorithm;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed; run `r` of `repeat` uses `seed + r` for data, topology
    /// and noise alike.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    pub algorithms: Vec<Algorithm>,
    /// Algorithms whose failure to converge makes the run command fail.
    #[serde(default = "default_required")]
    pub required: Vec<Algorithm>,
    #[serde(default)]
    pub comm_sigma: f64,
    #[serde(default = "default_round_cap")]
    pub round_cap: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(deserialize_with = "deserialize_problem")]
    pub problem: DataSpec,
    pub topologies: Vec<TopologyKind>,
    #[serde(default)]
    pub dp2g: Dp2gSection,
    #[serde(default)]
    pub baselines: BaselineSection,
    /// Baseline accuracy targets used when DP2G is not part of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetSection>,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_seed() -> u64 {
    1
}
fn default_repeat() -> usize {
    1
}
fn default_required() -> Vec<Algorithm> {
    vec![Algorithm::Dp2g]
}
fn default_round_cap() -> usize {
    5000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// `[problem]` as written: only `kind` is mandatory.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    kind: ProblemKind,
    agents: Option<usize>,
    samples_per_agent: Option<usize>,
    dimension: Option<usize>,
    sparsity: Option<usize>,
    response_noise: Option<f64>,
    label_noise: Option<f64>,
    lambda: Option<f64>,
    l1: Option<f64>,
    l2: Option<f64>,
}

fn deserialize_problem<'de, D: Deserializer<'de>>(d: D) -> Result<DataSpec, D::Error> {
    let s = ProblemSection::deserialize(d)?;
    let mut spec = DataSpec::benchmark(s.kind);
    spec.agents = s.agents.unwrap_or(spec.agents);
    spec.samples_per_agent = s.samples_per_agent.unwrap_or(spec.samples_per_agent);
    spec.dimension = s.dimension.unwrap_or(spec.dimension);
    spec.sparsity = s.sparsity.or(spec.sparsity);
    spec.response_noise = s.response_noise.unwrap_or(spec.response_noise);
    spec.label_noise = s.label_noise.unwrap_or(spec.label_noise);
    spec.lambda = s.lambda.unwrap_or(spec.lambda);
    spec.l1 = s.l1.unwrap_or(spec.l1);
    spec.l2 = s.l2.unwrap_or(spec.l2);
    Ok(spec)
}

/// Solver settings; the round cap and noise level are shared with the
/// baselines and live at the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dp2gSection {
    pub schedules: Schedules,
    pub stopping: StoppingMode,
    pub alpha_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_fraction: Option<f64>,
    pub inner_cap: usize,
    pub max_consensus_margin: usize,
}

impl Default for Dp2gSection {
    fn default() -> Self {
        let d = Dp2gConfig::default();
        Self {
            schedules: d.schedules,
            stopping: d.stopping,
            alpha_factor: d.alpha_factor,
            sigma_fraction: d.sigma_fraction,
            inner_cap: d.inner_cap,
            max_consensus_margin: d.max_consensus_margin,
        }
    }
}

/// Per-method stepsize overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dgd_fixed_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dgd_diminishing_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nids_alpha: Option<f64>,
    pub force_nonsmooth: bool,
}

impl BaselineSection {
    pub fn alpha(&self, algorithm: Algorithm) -> Option<f64> {
        match algorithm {
            Algorithm::DgdFixed => self.dgd_fixed_alpha,
            Algorithm::DgdDiminishing => self.dgd_diminishing_alpha,
            Algorithm::Extra => self.extra_alpha,
            Algorithm::Nids => self.nids_alpha,
            Algorithm::Dp2g => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub consensus_violation: f64,
    pub optimality_residual: f64,
}

/// A parse or validation failure, with the offending line when known.
#[derive(Debug)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub snippet: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.snippet) {
            (Some(line), Some(snippet)) => {
                write!(f, "{}:{line}: {}\n  {line} | {snippet}", self.source_name, self.message)
            }
            (Some(line), None) => write!(f, "{}:{line}: {}", self.source_name, self.message),
            _ => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses and validates TOML text; `source_name` labels error messages.
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|span| text[..span.start].matches('\n').count() + 1);
            ConfigError {
                source_name: source_name.into(),
                line,
                snippet: line.and_then(|l| text.lines().nth(l - 1)).map(|s| s.trim_end().to_string()),
                message: e.message().to_string(),
            }
        })?;
        config.validate().map_err(|e| {
            // Point at the first line mentioning the offending key, if any.
            let message = e.to_string();
            let key = message.split('`').nth(1).unwrap_or("");
            let line = (!key.is_empty())
                .then(|| text.lines().position(|l| l.trim_start().starts_with(key)))
                .flatten()
                .map(|i| i + 1);
            ConfigError {
                source_name: source_name.into(),
                line,
                snippet: line.and_then(|l| text.lines().nth(l - 1)).map(|s| s.trim_end().to_string()),
                message,
            }
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::from_toml(&text, &path.display().to_string())?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            bail!("`algorithms` must list at least one method");
        }
        if self.topologies.is_empty() {
            bail!("`topologies` must list at least one graph");
        }
        if self.repeat == 0 {
            bail!("`repeat` must be at least 1");
        }
        if self.round_cap == 0 {
            bail!("`round_cap` must be positive");
        }
        if !(self.comm_sigma >= 0.0 && self.comm_sigma.is_finite()) {
            bail!("`comm_sigma` must be a finite value >= 0, got {}", self.comm_sigma);
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                bail!("`algorithms` lists {} twice", a.label());
            }
        }
        for r in &self.required {
            if !self.algorithms.contains(r) {
                bail!("`required` names {} which is not in `algorithms`", r.label());
            }
        }
        let has_baseline = self.algorithms.iter().any(|a| *a != Algorithm::Dp2g);
        if has_baseline && !self.algorithms.contains(&Algorithm::Dp2g) && self.targets.is_none() {
            bail!("`targets` are required when baselines run without dp2g");
        }
        if self.problem.kind == ProblemKind::ElasticNet && has_baseline && !self.baselines.force_nonsmooth {
            bail!("`algorithms` includes smooth baselines on the elastic net; set baselines.force_nonsmooth");
        }
        self.dp2g_config().validate()?;
        Ok(())
    }

    pub fn dp2g_config(&self) -> Dp2gConfig {
        let s = &self.dp2g;
        Dp2gConfig {
            schedules: s.schedules,
            stopping: s.stopping,
            alpha_factor: s.alpha_factor,
            sigma_fraction: s.sigma_fraction,
            inner_cap: s.inner_cap,
            round_cap: self.round_cap,
            comm_sigma: self.comm_sigma,
            max_consensus_margin: s.max_consensus_margin,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeat as u64).map(|r| self.seed + r).collect()
    }

    /// Short digest of the resolved configuration, output directory
    /// excluded.
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("configs always serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
