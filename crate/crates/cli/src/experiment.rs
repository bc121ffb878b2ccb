//! Executing configured experiments and the result file format.

use std::path::{Path, PathBuf};

use equal_core::metrics::curve_csv;
use equal_core::mitigate::{EnsembleOptions, RunOptions, SchemeRun};
use equal_core::precision::MAX_BITS;
use equal_core::seed::derive_seed;
use equal_core::topology::{random_chimera_instance, sk_maxcut_graph};
use equal_core::{
    cast_maxcut, estimate_ground, exact_ground, run_scheme, ChimeraSpec, Effort, ErReport,
    GroundTruth, IsingModel, Scheme, SpinConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Benchmark, ExperimentConfig, GroundTruthSpec};
use crate::CliError;

// Ground-truth estimates are seeded from the instance alone, so every scheme
// run on the same instance is measured against the same reference.
const GROUND_STREAM: u64 = 0x4752_4F55_4E44;

/// One scheme run on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scheme: Scheme,
    pub instance_seed: u64,
    pub n: usize,
    pub e_min: f64,
    pub e_global: GroundTruth,
    pub er: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_er: Option<f64>,
    pub per_member_best: Vec<f64>,
    pub best_state: SpinConfig,
    pub trials_used: u64,
    pub config: ExperimentConfig,
    /// Seconds; the only field allowed to differ between identical runs.
    pub wall_time: f64,
}

impl RunResult {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("invalid result file {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    /// File stem used for this result's outputs.
    pub fn stem(&self) -> String {
        format!("{}-{}", self.scheme, self.instance_seed)
    }
}

pub fn load_instance(cfg: &ExperimentConfig) -> Result<IsingModel, CliError> {
    match &cfg.benchmark {
        Benchmark::Chimera { m } => Ok(random_chimera_instance(ChimeraSpec::new(*m)?, cfg.instance_seed)?),
        Benchmark::Sk { n } => Ok(cast_maxcut(&sk_maxcut_graph(*n, cfg.instance_seed)?)),
        Benchmark::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read model {}: {e}", path.display()))
            })?;
            IsingModel::from_json(&text)
                .map_err(|e| CliError::Usage(format!("invalid model {}: {e}", path.display())))
        }
    }
}

pub fn ground_truth(
    model: &IsingModel,
    spec: GroundTruthSpec,
    instance_seed: u64,
) -> Result<GroundTruth, CliError> {
    Ok(match spec {
        GroundTruthSpec::Exact => exact_ground(model)?,
        GroundTruthSpec::Estimate { restarts, sweeps } => estimate_ground(
            model,
            Effort { restarts, sweeps },
            derive_seed(instance_seed, GROUND_STREAM),
        )?,
    })
}

/// A validated config together with its instance and reference energy.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub model: IsingModel,
    pub ground: GroundTruth,
}

impl Prepared {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        config.validate(None)?;
        let model = load_instance(&config)?;
        config.validate(Some(model.n()))?;
        let ground = ground_truth(&model, config.ground_truth, config.instance_seed)?;
        Ok(Self { config, model, ground })
    }

    fn run_options(&self, parallel: bool) -> RunOptions {
        RunOptions {
            ensemble: EnsembleOptions {
                signs: self.config.perturbation_signs,
                ..EnsembleOptions::default()
            },
            parallel,
        }
    }

    /// Runs `scheme` with `members` QMIs on a device of `bits` precision.
    pub fn execute_with(
        &self,
        scheme: Scheme,
        members: usize,
        bits: u32,
        parallel: bool,
    ) -> Result<SchemeRun, CliError> {
        let c = &self.config;
        let device = equal_core::DeviceModel { bits, ..c.device.clone() };
        Ok(run_scheme(
            scheme,
            &self.model,
            &device,
            members,
            c.total_trials,
            c.master_seed,
            self.run_options(parallel),
        )?)
    }

    pub fn execute(&self, parallel: bool) -> Result<(RunResult, Option<String>), CliError> {
        let c = &self.config;
        let run = self.execute_with(c.scheme, c.members(), c.device.bits, parallel)?;
        let report = ErReport::new(run.result.best.1, self.ground.clone(), None)?;
        let curve = (!c.checkpoints.is_empty()).then(|| {
            let best: Vec<(u64, f64)> = c
                .checkpoints
                .iter()
                .map(|&t| (t, run.best_at(t, c.total_trials)))
                .collect();
            curve_csv(&report.clone().with_curve(&best).curve.unwrap_or_default())
        });
        let result = RunResult {
            scheme: c.scheme,
            instance_seed: c.instance_seed,
            n: self.model.n(),
            e_min: report.e_min,
            e_global: report.e_global,
            er: report.er,
            relative_er: None,
            per_member_best: run.result.per_member_best.iter().map(|p| p.1).collect(),
            best_state: run.result.best.0.clone(),
            trials_used: run.result.trials_used,
            config: c.clone(),
            wall_time: run.result.wall_time,
        };
        Ok((result, curve))
    }

    /// Baseline ER at each precision, relative to the same run at full precision.
    pub fn precision_profile(&self, bits: &[u32]) -> Result<PrecisionProfile, CliError> {
        let er_at = |b: u32| -> Result<f64, CliError> {
            let run = self.execute_with(Scheme::Baseline, 1, b, false)?;
            Ok(equal_core::energy_residual(run.result.best.1, &self.ground))
        };
        let reference_er = er_at(MAX_BITS)?;
        let rows = bits
            .par_iter()
            .map(|&b| {
                let er = er_at(b)?;
                Ok(ProfileRow {
                    bits: b,
                    er,
                    relative_er: equal_core::relative_er(er, reference_er)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(PrecisionProfile { reference_er, rows })
    }

    /// EQUAL ER for each ensemble size at a fixed total budget; `m = 1` is the baseline.
    pub fn ensemble_sweep(&self, sizes: &[usize]) -> Result<Vec<(usize, f64)>, CliError> {
        sizes
            .par_iter()
            .map(|&m| {
                let scheme = if m == 1 { Scheme::Baseline } else { Scheme::Equal };
                let run = self.execute_with(scheme, m, self.config.device.bits, false)?;
                Ok((m, equal_core::energy_residual(run.result.best.1, &self.ground)))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionProfile {
    /// Baseline ER of the unquantized (53-bit) run.
    pub reference_er: f64,
    pub rows: Vec<ProfileRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub bits: u32,
    pub er: f64,
    pub relative_er: Option<f64>,
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("bits,relative_er,er\n");
    for r in rows {
        let rel = r.relative_er.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{rel},{}\n", r.bits, r.er));
    }
    out
}

pub fn sweep_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("m,er\n");
    for (m, er) in rows {
        out.push_str(&format!("{m},{er}\n"));
    }
    out
}

/// Fills in `relative_er` against a paired baseline result.
///
/// The two runs must share the instance, device and reference energy;
/// anything else would compare different problems.
pub fn attach_baseline(result: &mut RunResult, baseline: &RunResult) -> Result<(), CliError> {
    let (a, b) = (&result.config, &baseline.config);
    let mut mismatches = Vec::new();
    if a.benchmark != b.benchmark {
        mismatches.push("benchmark".to_string());
    }
    if a.instance_seed != b.instance_seed {
        mismatches.push(format!("instance_seed ({} vs {})", a.instance_seed, b.instance_seed));
    }
    if a.device != b.device {
        mismatches.push("device".to_string());
    }
    if a.total_trials != b.total_trials {
        mismatches.push(format!("total_trials ({} vs {})", a.total_trials, b.total_trials));
    }
    if result.e_global.energy != baseline.e_global.energy {
        mismatches.push("e_global".to_string());
    }
    if !mismatches.is_empty() {
        return Err(CliError::Config(
            mismatches
                .into_iter()
                .map(|m| format!("baseline mismatch: {m}"))
                .collect(),
        ));
    }
    result.relative_er = equal_core::relative_er(result.er, baseline.er)?;
    Ok(())
}

/// Writes the result JSON (and curve CSV) into the configured output directory.
pub fn write_outputs(result: &RunResult, curve: Option<&str>) -> Result<PathBuf, CliError> {
    let dir = &result.config.output_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.json", result.stem()));
    crate::write_file(&path, &result.to_json())?;
    if let Some(csv) = curve {
        crate::write_file(&dir.join(format!("{}.curve.csv", result.stem())), csv)?;
    }
    Ok(path)
}
