//! A simulated annealer with systematic programming bias.
//!
//! Programming a QMI adds one fixed Gaussian error draw to every
//! coefficient. The draw is seeded by a digest of the programmed
//! coefficients and the device seed: the same QMI always anneals the same
//! corrupted Hamiltonian, while any coefficient change gets a fresh,
//! independent error. Trials are Metropolis anneals of the corrupted
//! Hamiltonian, scored on the caller's true model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Adjacency, IsingModel, Term};
use crate::precision::{DeviceRanges, Qmi};
use crate::samples::SampleSet;
use crate::seed::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceModel {
    pub bits: u32,
    #[serde(flatten)]
    pub ranges: DeviceRanges,
    pub sigma_h: f64,
    pub sigma_j: f64,
    pub sweeps: usize,
    /// Inverse temperature at the first and last sweep.
    pub beta: (f64, f64),
    /// Probability that a trial resumes from the previous trial's final state.
    pub trial_correlation: f64,
    pub device_seed: u64,
}

// The default is a biased device calibrated on C2 instances: a cold final
// temperature makes every trial settle into the corrupted model's ground
// state, and the field error is large enough that this state is usually not
// the true one. Warmer schedules or smaller errors let the sampler reach the
// true optimum by chance and hide the bias at this problem size.
impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            bits: 8,
            ranges: DeviceRanges::default(),
            sigma_h: 0.2,
            sigma_j: 0.05,
            sweeps: 200,
            beta: (0.1, 50.0),
            trial_correlation: 0.0,
            device_seed: 0,
        }
    }
}

impl DeviceModel {
    /// A bias-free device with the given precision and schedule.
    pub fn noiseless(bits: u32, sweeps: usize, beta: (f64, f64)) -> Self {
        Self {
            bits,
            sigma_h: 0.0,
            sigma_j: 0.0,
            sweeps,
            beta,
            ..Self::default()
        }
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.bits == 0 || self.bits > crate::precision::MAX_BITS {
            out.push(format!("bits must be in 1..=53, got {}", self.bits));
        }
        if let Err(e) = self.ranges.validate() {
            out.push(e.to_string());
        }
        if !(self.sigma_h >= 0.0) || !(self.sigma_j >= 0.0) {
            out.push("sigma_h and sigma_j must be non-negative".into());
        }
        if self.sweeps < 1 {
            out.push("sweeps must be >= 1".into());
        }
        let (b0, b1) = self.beta;
        if !(b0 > 0.0 && b0 <= b1 && b1.is_finite()) {
            out.push(format!("beta must satisfy 0 < start <= end, got [{b0}, {b1}]"));
        }
        if !(0.0..=1.0).contains(&self.trial_correlation) {
            out.push("trial_correlation must lie in [0, 1]".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDevice(v.join("; ")))
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        geometric_betas(self.beta.0, self.beta.1, self.sweeps)
    }
}

/// `sweeps` inverse temperatures interpolated geometrically from `start` to `end`.
pub fn geometric_betas(start: f64, end: f64, sweeps: usize) -> Vec<f64> {
    if sweeps == 1 {
        return vec![end];
    }
    let ratio = (end / start).ln() / (sweeps - 1) as f64;
    (0..sweeps).map(|k| start * (ratio * k as f64).exp()).collect()
}

/// A QMI as the device will actually run it.
#[derive(Clone, Debug)]
pub struct ProgrammedQmi {
    pub intended: Qmi,
    pub corrupted: IsingModel,
    pub bias_fingerprint: u64,
    device: DeviceModel,
    adjacency: Adjacency,
}

impl ProgrammedQmi {
    pub fn device(&self) -> &DeviceModel {
        &self.device
    }
}

fn coefficient_digest(model: &IsingModel, device_seed: u64) -> [u8; 32] {
    // -0.0 and 0.0 are the same coefficient
    let canon = |v: f64| if v == 0.0 { 0u64 } else { v.to_bits() };
    let mut hasher = Sha256::new();
    hasher.update(b"qmi/v1");
    hasher.update((model.n() as u64).to_le_bytes());
    for (&i, &v) in model.linear() {
        hasher.update((i as u64).to_le_bytes());
        hasher.update(canon(v).to_le_bytes());
    }
    hasher.update(b"|");
    for (&(a, b), &v) in model.quadratic() {
        hasher.update((a as u64).to_le_bytes());
        hasher.update((b as u64).to_le_bytes());
        hasher.update(canon(v).to_le_bytes());
    }
    hasher.update(b"|");
    hasher.update(device_seed.to_le_bytes());
    hasher.finalize().into()
}

/// Loads `qmi` onto the device, fixing its programming error.
pub fn program(device: &DeviceModel, qmi: &Qmi) -> Result<ProgrammedQmi> {
    device.validate()?;
    if qmi.bits != device.bits {
        return Err(Error::IncompatibleDevice(format!(
            "qmi quantized to {} bits, device has {}",
            qmi.bits, device.bits
        )));
    }
    if qmi.ranges != device.ranges {
        return Err(Error::IncompatibleDevice(format!(
            "qmi ranges {:?} differ from device ranges {:?}",
            qmi.ranges, device.ranges
        )));
    }
    let digest = coefficient_digest(&qmi.model, device.device_seed);
    let fingerprint = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    let mut rng = ChaCha8Rng::from_seed(digest);
    let corrupted = qmi.model.map_coefficients(|term, v| {
        let sigma = match term {
            Term::Linear(_) => device.sigma_h,
            Term::Coupler(..) => device.sigma_j,
        };
        let z: f64 = rng.sample(StandardNormal);
        if sigma > 0.0 {
            v + sigma * z
        } else {
            v
        }
    });
    let adjacency = corrupted.adjacency();
    Ok(ProgrammedQmi {
        intended: qmi.clone(),
        corrupted,
        bias_fingerprint: fingerprint,
        device: device.clone(),
        adjacency,
    })
}

// Uphill moves costlier than this many units of kT are rejected without a draw.
const MAX_UPHILL: f64 = 40.0;

/// Metropolis sweeps over `spins` in site order, one sweep per entry of `betas`.
pub fn anneal_in_place<R: Rng + ?Sized>(
    adj: &Adjacency,
    spins: &mut [i8],
    fields: &mut [f64],
    betas: &[f64],
    rng: &mut R,
) {
    let n = adj.n();
    for &beta in betas {
        for i in 0..n {
            let cost = beta * -2.0 * f64::from(spins[i]) * fields[i];
            if cost <= 0.0 || (cost < MAX_UPHILL && rng.random::<f64>() < (-cost).exp()) {
                adj.flip(spins, fields, i);
            }
        }
    }
}

/// Runs `trials` anneals of `pq`, handing each final state to `visit`.
fn trial_stream(pq: &ProgrammedQmi, trials: u64, trial_seed: u64, mut visit: impl FnMut(&[i8])) {
    let adj = &pq.adjacency;
    let n = adj.n();
    let betas = pq.device.betas();
    let rho = pq.device.trial_correlation;
    let mut rng = rng_from_seed(trial_seed);
    let mut spins = vec![1i8; n];
    let mut fields = vec![0.0; n];
    for t in 0..trials {
        let resume = t > 0 && rho > 0.0 && rng.random::<f64>() < rho;
        if !resume {
            for s in spins.iter_mut() {
                *s = if rng.random::<bool>() { 1 } else { -1 };
            }
            fields = adj.local_fields(&spins);
        }
        anneal_in_place(adj, &mut spins, &mut fields, &betas, &mut rng);
        visit(&spins);
    }
}

/// Executes `trials` trials; every outcome is scored on `true_model`.
pub fn sample(
    pq: &ProgrammedQmi,
    trials: u64,
    trial_seed: u64,
    true_model: &IsingModel,
) -> Result<SampleSet> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if true_model.n() != pq.corrupted.n() {
        return Err(Error::LengthMismatch {
            expected: pq.corrupted.n(),
            found: true_model.n(),
        });
    }
    let scorer = true_model.adjacency();
    let mut set = SampleSet::new(pq.bias_fingerprint);
    trial_stream(pq, trials, trial_seed, |s| set.record(s, |s| scorer.energy(s)));
    Ok(set)
}

pub fn validate_checkpoints(checkpoints: &[u64], budget: u64) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidCheckpoints("no checkpoints given".into()));
    }
    if checkpoints[0] == 0 {
        return Err(Error::InvalidCheckpoints("checkpoints must be positive".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidCheckpoints("checkpoints must be strictly ascending".into()));
    }
    if *checkpoints.last().unwrap() != budget {
        return Err(Error::InvalidCheckpoints(format!(
            "last checkpoint {} must equal the trial budget {budget}",
            checkpoints.last().unwrap()
        )));
    }
    Ok(())
}

/// Best energy seen after each checkpoint's worth of trials, over the same
/// trial stream [`sample`] would produce for `trial_budget` trials.
pub fn run_trials_curve(
    pq: &ProgrammedQmi,
    trial_budget: u64,
    checkpoints: &[u64],
    trial_seed: u64,
    true_model: &IsingModel,
) -> Result<Vec<(u64, f64)>> {
    validate_checkpoints(checkpoints, trial_budget)?;
    let set = sample(pq, trial_budget, trial_seed, true_model)?;
    let running = set.best_so_far();
    Ok(checkpoints
        .iter()
        .map(|&c| (c, running[c as usize - 1]))
        .collect())
}
