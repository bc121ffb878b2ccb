use std::path::{Path, PathBuf};

use equal_core::anneal::validate_checkpoints;
use equal_core::metrics::MAX_EXACT_QUBITS;
use equal_core::mitigate::PerturbationSigns;
use equal_core::{DeviceModel, Effort, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Where the problem instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Benchmark {
    /// Random N(0,1) fields and couplers on a Chimera C_m graph.
    Chimera { m: usize },
    /// Max-Cut on a complete graph with N(0,1) edge weights.
    Sk { n: usize },
    /// A model file in the core JSON format.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GroundTruthSpec {
    Exact,
    Estimate { restarts: usize, sweeps: usize },
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        let e = Effort::default();
        GroundTruthSpec::Estimate {
            restarts: e.restarts,
            sweeps: e.sweeps,
        }
    }
}

const DEVICE_KEYS: [&str; 9] = [
    "bits",
    "h_max",
    "j_max",
    "sigma_h",
    "sigma_j",
    "sweeps",
    "beta",
    "trial_correlation",
    "device_seed",
];

fn default_benchmark() -> Benchmark {
    Benchmark::Chimera { m: 2 }
}

fn default_scheme() -> Scheme {
    Scheme::Baseline
}

fn default_trials() -> u64 {
    20_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Everything needed to reproduce one experiment. Result files embed the
/// resolved copy of this struct.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_benchmark")]
    pub benchmark: Benchmark,
    #[serde(default)]
    pub instance_seed: u64,
    #[serde(default)]
    pub device: DeviceModel,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Ensemble size for `equal` and `equal_plus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Gauge count for `srt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_gauges: Option<usize>,
    #[serde(default = "default_trials")]
    pub total_trials: u64,
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub ground_truth: GroundTruthSpec,
    #[serde(default)]
    pub perturbation_signs: PerturbationSigns,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: default_benchmark(),
            instance_seed: 0,
            device: DeviceModel::default(),
            scheme: default_scheme(),
            m: None,
            k_gauges: None,
            total_trials: default_trials(),
            checkpoints: Vec::new(),
            master_seed: 0,
            ground_truth: GroundTruthSpec::default(),
            perturbation_signs: PerturbationSigns::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        // The device block flattens its ranges, which serde cannot police, so
        // check its keys by hand.
        if let Some(device) = value.get("device").and_then(|d| d.as_object()) {
            let unknown: Vec<&str> = device
                .keys()
                .map(String::as_str)
                .filter(|k| !DEVICE_KEYS.contains(k))
                .collect();
            if !unknown.is_empty() {
                return Err(format!("unknown device fields: {}", unknown.join(", ")));
            }
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    /// Number of QMIs the scheme programs.
    pub fn members(&self) -> usize {
        match self.scheme {
            Scheme::Equal | Scheme::EqualPlus => self.m.unwrap_or(0),
            Scheme::Srt => self.k_gauges.unwrap_or(0),
            Scheme::Baseline | Scheme::Sqc => 1,
        }
    }

    /// Every violated field, one message each; `n` is the instance size
    /// when already known.
    pub fn violations(&self, n: Option<usize>) -> Vec<String> {
        let mut out = Vec::new();
        match &self.benchmark {
            Benchmark::Chimera { m } if *m == 0 => out.push("benchmark.m: must be >= 1".into()),
            Benchmark::Sk { n } if *n < 2 => out.push("benchmark.n: must be >= 2".into()),
            _ => {}
        }
        out.extend(self.device.violations().into_iter().map(|v| format!("device: {v}")));
        match self.scheme {
            Scheme::Equal | Scheme::EqualPlus => match self.m {
                None => out.push(format!("m: required for scheme {}", self.scheme)),
                Some(m) if m < 2 => out.push(format!("m: ensemble needs >= 2 members, got {m}")),
                _ => {}
            },
            Scheme::Srt => match self.k_gauges {
                None => out.push("k_gauges: required for scheme srt".into()),
                Some(0) => out.push("k_gauges: must be >= 1".into()),
                _ => {}
            },
            Scheme::Baseline | Scheme::Sqc => {}
        }
        let members = self.members().max(1) as u64;
        if self.total_trials < members {
            out.push(format!(
                "total_trials: {} cannot cover {members} members",
                self.total_trials
            ));
        }
        if !self.checkpoints.is_empty() {
            if let Err(e) = validate_checkpoints(&self.checkpoints, self.total_trials) {
                out.push(format!("checkpoints: {e}"));
            }
        }
        match self.ground_truth {
            GroundTruthSpec::Exact => {
                if let Some(n) = n.filter(|&n| n > MAX_EXACT_QUBITS) {
                    out.push(format!(
                        "ground_truth: exact enumeration supports n <= {MAX_EXACT_QUBITS}, instance has {n}; use estimate"
                    ));
                }
            }
            GroundTruthSpec::Estimate { restarts, sweeps } => {
                if restarts == 0 || sweeps == 0 {
                    out.push("ground_truth: restarts and sweeps must be >= 1".into());
                }
            }
        }
        out
    }

    pub fn validate(&self, n: Option<usize>) -> Result<(), CliError> {
        let v = self.violations(n);
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v))
        }
    }
}

/// `EQUAL_SEED`, when set, replaces the configured master seed.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("EQUAL_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("EQUAL_SEED must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}
