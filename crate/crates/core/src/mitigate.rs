//! Ensemble error mitigation.
//!
//! * EQUAL: split the trial budget across the original QMI and copies whose
//!   coefficients are nudged by less than one quantization step, so each copy
//!   is programmed with its own independent bias. The best outcome over all
//!   members wins.
//! * SQC: greedy single-flip descent applied to sampled outcomes.
//! * EQUAL+: EQUAL followed by SQC on every distinct outcome.
//! * SRT: spin-reversal gauges, each programmed (and biased) separately.
//!
//! Every member derives its seeds from `(master_seed, member index)` only,
//! so parallel and sequential execution produce identical results.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{program, sample, DeviceModel};
use crate::error::{Error, Result};
use crate::model::{Adjacency, IsingModel, SpinConfig, Term};
use crate::precision::{grid_step, normalize, quantize_with, DeviceRanges, Qmi, Rounding};
use crate::samples::SampleSet;
use crate::seed::{derive_seed, rng_from_seed, stream};

// Smallest energy drop SQC treats as an improvement.
const SQC_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Baseline,
    Equal,
    #[serde(rename = "sqc_only")]
    Sqc,
    EqualPlus,
    Srt,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Equal => "equal",
            Scheme::Sqc => "sqc_only",
            Scheme::EqualPlus => "equal_plus",
            Scheme::Srt => "srt",
        }
    }

    /// Whether outcomes go through SQC before selection.
    pub fn refines(self) -> bool {
        matches!(self, Scheme::Sqc | Scheme::EqualPlus)
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Scheme::Baseline, Scheme::Equal, Scheme::Sqc, Scheme::EqualPlus, Scheme::Srt]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown scheme {s:?}; expected baseline, equal, equal_plus, sqc_only or srt"
                ))
            })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sign applied to the perturbation of each coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationSigns {
    /// Every coefficient moves by `+r`.
    #[default]
    Positive,
    /// Each coefficient independently moves by `+r` or `-r`.
    Random,
}

/// `r` uniform on `[2^-(b+1), 2^-b]`, in units of the coefficient range.
pub fn perturbation_magnitude<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> f64 {
    let hi = (-(bits as f64)).exp2();
    rng.random_range(hi / 2.0..=hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    /// Member 0 is the unperturbed QMI.
    pub members: Vec<Qmi>,
    /// `r` for each member, 0 for member 0.
    pub perturbation_magnitudes: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub signs: PerturbationSigns,
    pub rounding: Rounding,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            signs: PerturbationSigns::Positive,
            rounding: Rounding::Nearest,
        }
    }
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Builds members from explicit magnitudes; `magnitudes[0]` must be 0.
    ///
    /// All members share the original's normalization; a perturbed value
    /// that would leave the device range is clamped onto its edge.
    pub fn from_magnitudes(
        original: &IsingModel,
        magnitudes: &[f64],
        bits: u32,
        ranges: DeviceRanges,
        opts: EnsembleOptions,
        sign_seed: u64,
    ) -> Result<Self> {
        if magnitudes.first() != Some(&0.0) {
            return Err(Error::InvalidArgument(
                "member 0 must be the unperturbed original".into(),
            ));
        }
        let (normalized, s) = normalize(original, ranges)?;
        let mut members = Vec::with_capacity(magnitudes.len());
        for (k, &r) in magnitudes.iter().enumerate() {
            let mut rng = rng_from_seed(derive_seed(sign_seed, k as u64));
            let mut sign = || match opts.signs {
                PerturbationSigns::Positive => 1.0,
                PerturbationSigns::Random => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let perturbed = if k == 0 {
                normalized.clone()
            } else {
                normalized.map_coefficients(|term, v| {
                    let max = match term {
                        Term::Linear(_) => ranges.h_max,
                        Term::Coupler(..) => ranges.j_max,
                    };
                    (v + sign() * r * max).clamp(-max, max)
                })
            };
            let mut qmi = quantize_with(&perturbed, bits, ranges, opts.rounding)?;
            qmi.scale_applied = s;
            members.push(qmi);
        }
        Ok(Self {
            members,
            perturbation_magnitudes: magnitudes.to_vec(),
        })
    }
}

pub fn make_ensemble(
    original: &IsingModel,
    m: usize,
    bits: u32,
    ranges: DeviceRanges,
    master_seed: u64,
) -> Result<Ensemble> {
    make_ensemble_with(original, m, bits, ranges, master_seed, EnsembleOptions::default())
}

pub fn make_ensemble_with(
    original: &IsingModel,
    m: usize,
    bits: u32,
    ranges: DeviceRanges,
    master_seed: u64,
    opts: EnsembleOptions,
) -> Result<Ensemble> {
    if m < 2 {
        return Err(Error::NeedEnsemble(m));
    }
    build_ensemble(original, m, bits, ranges, master_seed, opts)
}

// Like make_ensemble but also accepts m = 1 (the baseline).
fn build_ensemble(
    original: &IsingModel,
    m: usize,
    bits: u32,
    ranges: DeviceRanges,
    master_seed: u64,
    opts: EnsembleOptions,
) -> Result<Ensemble> {
    let base = derive_seed(master_seed, stream::ENSEMBLE);
    let mut magnitudes = vec![0.0];
    for k in 1..m {
        let mut rng = rng_from_seed(derive_seed(base, k as u64));
        magnitudes.push(perturbation_magnitude(bits, &mut rng));
    }
    Ensemble::from_magnitudes(original, &magnitudes, bits, ranges, opts, derive_seed(base, u64::MAX))
}

/// Equal split of `total` trials over `m` members, remainder to member 0.
pub fn split_trials(total: u64, m: usize) -> Result<Vec<u64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one member".into()));
    }
    let share = total / m as u64;
    if share == 0 {
        return Err(Error::InvalidArgument(format!(
            "{total} trials cannot cover {m} members"
        )));
    }
    let mut out = vec![share; m];
    out[0] += total % m as u64;
    Ok(out)
}

/// Flips the best improving qubit until none is left. Returns the flip count.
pub fn sqc_in_place(adj: &Adjacency, spins: &mut [i8]) -> usize {
    let mut fields = adj.local_fields(spins);
    let mut flips = 0;
    loop {
        let mut best = (0usize, -SQC_TOLERANCE);
        for i in 0..spins.len() {
            let delta = -2.0 * f64::from(spins[i]) * fields[i];
            if delta < best.1 {
                best = (i, delta);
            }
        }
        if best.1 >= -SQC_TOLERANCE {
            return flips;
        }
        adj.flip(spins, &mut fields, best.0);
        flips += 1;
    }
}

/// Steepest single-flip descent to a 1-flip local minimum.
pub fn sqc(model: &IsingModel, z: &SpinConfig) -> Result<SpinConfig> {
    if z.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            found: z.len(),
        });
    }
    let mut spins = z.clone().into_inner();
    sqc_in_place(&model.adjacency(), &mut spins);
    Ok(SpinConfig::from_raw_unchecked(spins))
}

/// `h_i -> g_i h_i`, `J_ij -> g_i g_j J_ij`.
pub fn srt_transform(model: &IsingModel, gauge: &SpinConfig) -> Result<IsingModel> {
    if gauge.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            found: gauge.len(),
        });
    }
    let g = gauge.spins();
    Ok(model.map_coefficients(|term, v| match term {
        Term::Linear(i) => f64::from(g[i]) * v,
        Term::Coupler(a, b) => f64::from(g[a] * g[b]) * v,
    }))
}

/// Maps an outcome of the gauged model back to the original frame.
pub fn srt_untransform(gauge: &SpinConfig, z: &SpinConfig) -> Result<SpinConfig> {
    if gauge.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: gauge.len(),
            found: z.len(),
        });
    }
    Ok(SpinConfig::from_raw_unchecked(
        gauge.spins().iter().zip(z.spins()).map(|(g, s)| g * s).collect(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationResult {
    pub scheme: Scheme,
    pub best: (SpinConfig, f64),
    pub per_member_best: Vec<(usize, f64)>,
    pub trials_used: u64,
    /// Seconds; excluded from determinism comparisons.
    pub wall_time: f64,
}

/// Knobs shared by every scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub ensemble: EnsembleOptions,
    /// Execute members on the rayon pool.
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            ensemble: EnsembleOptions::default(),
            parallel: true,
        }
    }
}

/// Per-member raw samples plus, for refining schemes, the SQC image of
/// every entry.
#[derive(Clone, Debug)]
pub struct MemberOutcome {
    pub samples: SampleSet,
    pub refined: Option<Vec<(SpinConfig, f64)>>,
}

impl MemberOutcome {
    /// Energy credited to entry `idx`: post-SQC when refined.
    pub fn entry_energy(&self, idx: usize) -> f64 {
        match &self.refined {
            Some(r) => r[idx].1,
            None => self.samples.entries()[idx].energy,
        }
    }

    /// Best outcome with ties broken by lowest entry index.
    pub fn best(&self) -> (SpinConfig, f64) {
        let mut best = 0;
        for idx in 1..self.samples.entries().len() {
            if self.entry_energy(idx) < self.entry_energy(best) {
                best = idx;
            }
        }
        match &self.refined {
            Some(r) => r[best].clone(),
            None => {
                let e = &self.samples.entries()[best];
                (e.spins.clone(), e.energy)
            }
        }
    }

    /// Best energy after each of this member's trials.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.samples
            .sequence()
            .iter()
            .map(|&i| {
                best = best.min(self.entry_energy(i as usize));
                best
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SchemeRun {
    pub result: MitigationResult,
    pub members: Vec<MemberOutcome>,
    /// Trials given to each member.
    pub trials: Vec<u64>,
}

impl SchemeRun {
    /// All members' raw samples folded into one set.
    pub fn merged_samples(&self) -> SampleSet {
        let mut all = SampleSet::new(0);
        for m in &self.members {
            all.merge(&m.samples);
        }
        all
    }

    /// Lowest raw sample energy across members, ignoring any refinement.
    ///
    /// An EQUAL+ run shares its ensemble and trial streams with the EQUAL
    /// run of the same seed, so this is exactly what EQUAL would report.
    pub fn raw_best_energy(&self) -> f64 {
        self.members
            .iter()
            .filter_map(|m| m.samples.best().map(|s| s.energy))
            .fold(f64::INFINITY, f64::min)
    }

    /// Best energy once `t` of the total trials have run, with every member
    /// advanced in proportion to its share.
    pub fn best_at(&self, t: u64, total: u64) -> f64 {
        self.members
            .iter()
            .zip(&self.trials)
            .filter_map(|(m, &share)| {
                let used = (share as u128 * t as u128 / total as u128) as usize;
                (used > 0).then(|| m.best_so_far()[used - 1])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn map_members<T: Send, F>(count: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

fn refine(original: &Adjacency, set: &SampleSet) -> Vec<(SpinConfig, f64)> {
    set.entries()
        .iter()
        .map(|e| {
            let mut s = e.spins.clone().into_inner();
            sqc_in_place(original, &mut s);
            let energy = original.energy(&s);
            (SpinConfig::from_raw_unchecked(s), energy)
        })
        .collect()
}

fn finish(
    scheme: Scheme,
    members: Vec<MemberOutcome>,
    trials: Vec<u64>,
    started: Instant,
) -> SchemeRun {
    let per_member: Vec<(SpinConfig, f64)> = members.iter().map(MemberOutcome::best).collect();
    let mut best = 0;
    for (k, m) in per_member.iter().enumerate() {
        if m.1 < per_member[best].1 {
            best = k;
        }
    }
    let result = MitigationResult {
        scheme,
        best: per_member[best].clone(),
        per_member_best: per_member.iter().enumerate().map(|(k, m)| (k, m.1)).collect(),
        trials_used: trials.iter().sum(),
        wall_time: started.elapsed().as_secs_f64(),
    };
    SchemeRun {
        result,
        members,
        trials,
    }
}

fn member_trial_seed(master_seed: u64, k: usize) -> u64 {
    derive_seed(derive_seed(master_seed, stream::TRIALS), k as u64)
}

/// Samples every member of `ensemble` on `device`, scoring on `original`.
pub fn execute_ensemble(
    scheme: Scheme,
    original: &IsingModel,
    ensemble: &Ensemble,
    device: &DeviceModel,
    total_trials: u64,
    master_seed: u64,
    parallel: bool,
) -> Result<SchemeRun> {
    let started = Instant::now();
    let trials = split_trials(total_trials, ensemble.len())?;
    let scorer = original.adjacency();
    let members = map_members(ensemble.len(), parallel, |k| {
        let pq = program(device, &ensemble.members[k])?;
        let samples = sample(&pq, trials[k], member_trial_seed(master_seed, k), original)?;
        let refined = scheme.refines().then(|| refine(&scorer, &samples));
        Ok(MemberOutcome { samples, refined })
    })?;
    Ok(finish(scheme, members, trials, started))
}

/// Runs `scheme` end to end. `members` is the ensemble size for EQUAL and
/// EQUAL+, the gauge count for SRT, and ignored for single-QMI schemes.
pub fn run_scheme(
    scheme: Scheme,
    original: &IsingModel,
    device: &DeviceModel,
    members: usize,
    total_trials: u64,
    master_seed: u64,
    opts: RunOptions,
) -> Result<SchemeRun> {
    device.validate()?;
    match scheme {
        Scheme::Baseline | Scheme::Sqc => {
            let ens = build_ensemble(original, 1, device.bits, device.ranges, master_seed, opts.ensemble)?;
            execute_ensemble(scheme, original, &ens, device, total_trials, master_seed, opts.parallel)
        }
        Scheme::Equal | Scheme::EqualPlus => {
            let ens = make_ensemble_with(
                original,
                members,
                device.bits,
                device.ranges,
                master_seed,
                opts.ensemble,
            )?;
            execute_ensemble(scheme, original, &ens, device, total_trials, master_seed, opts.parallel)
        }
        Scheme::Srt => run_srt_detailed(original, device, members, total_trials, master_seed, opts),
    }
}

/// Gauge 0 is the identity; gauges `1..k` are uniformly random.
pub fn srt_gauges(n: usize, k: usize, master_seed: u64) -> Vec<SpinConfig> {
    let base = derive_seed(master_seed, stream::GAUGES);
    (0..k)
        .map(|g| {
            if g == 0 {
                SpinConfig::from_raw_unchecked(vec![1; n])
            } else {
                SpinConfig::random(n, &mut rng_from_seed(derive_seed(base, g as u64)))
            }
        })
        .collect()
}

fn run_srt_detailed(
    original: &IsingModel,
    device: &DeviceModel,
    k_gauges: usize,
    total_trials: u64,
    master_seed: u64,
    opts: RunOptions,
) -> Result<SchemeRun> {
    if k_gauges < 1 {
        return Err(Error::InvalidArgument("k_gauges must be >= 1".into()));
    }
    let started = Instant::now();
    let base = build_ensemble(original, 1, device.bits, device.ranges, master_seed, opts.ensemble)?
        .members
        .remove(0);
    let gauges = srt_gauges(original.n(), k_gauges, master_seed);
    let trials = split_trials(total_trials, k_gauges)?;
    let scorer = original.adjacency();
    let members = map_members(k_gauges, opts.parallel, |k| {
        let gauge = &gauges[k];
        let qmi = Qmi {
            model: srt_transform(&base.model, gauge)?,
            ..base.clone()
        };
        let gauged_truth = srt_transform(original, gauge)?;
        let pq = program(device, &qmi)?;
        let raw = sample(&pq, trials[k], member_trial_seed(master_seed, k), &gauged_truth)?;
        // Replay the trial stream in the original frame, rescoring on the original.
        let mut samples = SampleSet::new(raw.model_id);
        for &idx in raw.sequence() {
            let z = srt_untransform(gauge, &raw.entries()[idx as usize].spins)?;
            samples.record(z.spins(), |s| scorer.energy(s));
        }
        Ok(MemberOutcome {
            samples,
            refined: None,
        })
    })?;
    Ok(finish(Scheme::Srt, members, trials, started))
}

pub fn run_baseline(
    original: &IsingModel,
    device: &DeviceModel,
    total_trials: u64,
    master_seed: u64,
) -> Result<MitigationResult> {
    Ok(run_scheme(Scheme::Baseline, original, device, 1, total_trials, master_seed, RunOptions::default())?.result)
}

pub fn run_equal(
    original: &IsingModel,
    device: &DeviceModel,
    m: usize,
    total_trials: u64,
    master_seed: u64,
) -> Result<MitigationResult> {
    Ok(run_scheme(Scheme::Equal, original, device, m, total_trials, master_seed, RunOptions::default())?.result)
}

pub fn run_equal_plus(
    original: &IsingModel,
    device: &DeviceModel,
    m: usize,
    total_trials: u64,
    master_seed: u64,
) -> Result<MitigationResult> {
    Ok(run_scheme(Scheme::EqualPlus, original, device, m, total_trials, master_seed, RunOptions::default())?.result)
}

/// Baseline sampling followed by SQC on every outcome.
pub fn run_sqc(
    original: &IsingModel,
    device: &DeviceModel,
    total_trials: u64,
    master_seed: u64,
) -> Result<MitigationResult> {
    Ok(run_scheme(Scheme::Sqc, original, device, 1, total_trials, master_seed, RunOptions::default())?.result)
}

pub fn run_srt(
    original: &IsingModel,
    device: &DeviceModel,
    k_gauges: usize,
    total_trials: u64,
    master_seed: u64,
) -> Result<MitigationResult> {
    Ok(run_scheme(Scheme::Srt, original, device, k_gauges, total_trials, master_seed, RunOptions::default())?.result)
}

/// Grid steps between two coefficients of range `max` at `bits` precision.
pub fn grid_distance(a: f64, b: f64, max: f64, bits: u32) -> f64 {
    (a - b).abs() / grid_step(max, bits)
}
