//! Energy Residual, ground-truth oracles and histograms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal_in_place, geometric_betas};
use crate::error::{Error, Result};
use crate::mitigate::sqc_in_place;
use crate::model::{IsingModel, SpinConfig};
use crate::samples::SampleSet;
use crate::seed::{derive_seed, rng_from_seed};

/// Largest model [`exact_ground`] will enumerate.
pub const MAX_EXACT_QUBITS: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMethod {
    ExactEnumeration,
    MultistartDescent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub energy: f64,
    pub method: GroundMethod,
    /// Only exhaustive enumeration certifies a global minimum.
    pub certified: bool,
    pub state: SpinConfig,
}

/// `|e_min - E_global|`.
pub fn energy_residual(e_min: f64, ground: &GroundTruth) -> f64 {
    (e_min - ground.energy).abs()
}

/// `scheme_er / baseline_er`; `None` when the baseline already reached the ground.
pub fn relative_er(scheme_er: f64, baseline_er: f64) -> Result<Option<f64>> {
    if !(scheme_er >= 0.0) || !(baseline_er >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "energy residuals must be non-negative, got {scheme_er} and {baseline_er}"
        )));
    }
    Ok((baseline_er > 0.0).then(|| scheme_er / baseline_er))
}

// Enumerates the low `free` spins with a Gray code, high spins fixed by `prefix`.
fn enumerate_block(
    adj: &crate::model::Adjacency,
    n: usize,
    free: usize,
    prefix: u64,
) -> (f64, u64) {
    let mut s: Vec<i8> = (0..n)
        .map(|k| {
            let on = k >= free && (prefix >> (k - free)) & 1 == 1;
            if on { 1 } else { -1 }
        })
        .collect();
    let mut fields = adj.local_fields(&s);
    let mut e = adj.energy(&s);
    let mut best = (e, 0u64);
    for step in 1u64..(1u64 << free) {
        let i = step.trailing_zeros() as usize;
        e += -2.0 * f64::from(s[i]) * fields[i];
        adj.flip(&mut s, &mut fields, i);
        if e < best.0 {
            best = (e, step ^ (step >> 1));
        }
    }
    (best.0, best.1 | prefix << free)
}

/// Exhaustive minimum over all `2^n` configurations.
pub fn exact_ground(model: &IsingModel) -> Result<GroundTruth> {
    let n = model.n();
    if n > MAX_EXACT_QUBITS {
        return Err(Error::TooLarge { n, max: MAX_EXACT_QUBITS });
    }
    let adj = model.adjacency();
    // Split the top bits into independent blocks for large n.
    let fixed = if n > 16 { 6 } else { 0 };
    let free = n - fixed;
    let blocks: Vec<(f64, u64)> = (0..1u64 << fixed)
        .into_par_iter()
        .map(|p| enumerate_block(&adj, n, free, p))
        .collect();
    let mut best = blocks[0];
    for &b in &blocks[1..] {
        if b.0 < best.0 {
            best = b;
        }
    }
    let state = SpinConfig::from_bits(n, best.1);
    Ok(GroundTruth {
        energy: model.energy(&state)?,
        method: GroundMethod::ExactEnumeration,
        certified: true,
        state,
    })
}

/// Work budget for [`estimate_ground`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    pub restarts: usize,
    pub sweeps: usize,
}

impl Default for Effort {
    fn default() -> Self {
        Self { restarts: 32, sweeps: 1000 }
    }
}

/// Best of `effort.restarts` noiseless anneals, each polished by SQC.
///
/// Restart `k` depends only on `(seed, k)`, so raising the restart count
/// keeps every earlier restart and can only lower the estimate.
pub fn estimate_ground(model: &IsingModel, effort: Effort, seed: u64) -> Result<GroundTruth> {
    if effort.restarts == 0 || effort.sweeps == 0 {
        return Err(Error::InvalidArgument("effort needs restarts and sweeps >= 1".into()));
    }
    let n = model.n();
    let (mh, mj) = model.max_abs();
    let unit = mh.max(mj);
    // Anneal a unit-scaled copy so the schedule fits any coefficient magnitude.
    let annealed = if unit > 0.0 { model.scale(1.0 / unit)? } else { model.clone() };
    let adj = annealed.adjacency();
    let scorer = model.adjacency();
    let betas = geometric_betas(0.1, 20.0, effort.sweeps);
    let runs: Vec<(f64, Vec<i8>)> = (0..effort.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let mut s = SpinConfig::random(n, &mut rng).into_inner();
            let mut fields = adj.local_fields(&s);
            anneal_in_place(&adj, &mut s, &mut fields, &betas, &mut rng);
            sqc_in_place(&scorer, &mut s);
            (scorer.energy(&s), s)
        })
        .collect();
    let mut best = 0;
    for k in 1..runs.len() {
        if runs[k].0 < runs[best].0 {
            best = k;
        }
    }
    let (energy, s) = runs.into_iter().nth(best).expect("at least one restart");
    Ok(GroundTruth {
        energy,
        method: GroundMethod::MultistartDescent,
        certified: false,
        state: SpinConfig::new(s)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

/// Equal-width bins over `[min, max]` of the sampled energies, weighted by
/// multiplicity. A zero-width span puts everything in the first bin.
pub fn energy_histogram(samples: &SampleSet, bins: usize) -> Result<Vec<HistogramBin>> {
    samples.require_nonempty()?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    let energies = samples.entries().iter().map(|e| e.energy);
    let lo = energies.clone().fold(f64::INFINITY, f64::min);
    let hi = energies.fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin {
            lower: lo + width * b as f64,
            upper: if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 },
            count: 0,
        })
        .collect();
    for e in samples.entries() {
        let idx = if width > 0.0 {
            (((e.energy - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        out[idx].count += e.multiplicity;
    }
    Ok(out)
}

/// Energy Residual summary for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErReport {
    pub e_min: f64,
    pub e_global: GroundTruth,
    pub er: f64,
    pub relative_er: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curve: Option<Vec<(u64, f64)>>,
}

impl ErReport {
    pub fn new(e_min: f64, ground: GroundTruth, baseline_er: Option<f64>) -> Result<Self> {
        let er = energy_residual(e_min, &ground);
        let relative = match baseline_er {
            Some(b) => relative_er(er, b)?,
            None => None,
        };
        Ok(Self {
            e_min,
            e_global: ground,
            er,
            relative_er: relative,
            curve: None,
        })
    }

    /// Converts a best-energy curve into an ER curve against this ground truth.
    pub fn with_curve(mut self, best_energies: &[(u64, f64)]) -> Self {
        self.curve = Some(
            best_energies
                .iter()
                .map(|&(t, e)| (t, energy_residual(e, &self.e_global)))
                .collect(),
        );
        self
    }
}

/// `trials,er` CSV with a header row.
pub fn curve_csv(curve: &[(u64, f64)]) -> String {
    let mut out = String::from("trials,er\n");
    for (t, er) in curve {
        out.push_str(&format!("{t},{er}\n"));
    }
    out
}
