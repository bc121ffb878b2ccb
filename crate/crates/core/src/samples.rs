use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpinConfig;

/// One distinct outcome, scored on the true problem Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub spins: SpinConfig,
    pub energy: f64,
    pub multiplicity: u64,
}

/// Outcomes of a batch of trials on one QMI.
///
/// Identical configurations are folded into one entry. Entries keep
/// first-seen order and `sequence` records which entry each trial produced,
/// so the trial stream can be replayed for best-so-far curves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "SampleSetFile", into = "SampleSetFile")]
pub struct SampleSet {
    pub model_id: u64,
    entries: Vec<Sample>,
    sequence: Vec<u32>,
    index: HashMap<SpinConfig, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct SampleSetFile {
    model_id: u64,
    entries: Vec<Sample>,
}

impl From<SampleSetFile> for SampleSet {
    fn from(f: SampleSetFile) -> Self {
        let index = f
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.spins.clone(), i))
            .collect();
        Self {
            model_id: f.model_id,
            entries: f.entries,
            sequence: Vec::new(),
            index,
        }
    }
}

impl From<SampleSet> for SampleSetFile {
    fn from(s: SampleSet) -> Self {
        Self {
            model_id: s.model_id,
            entries: s.entries,
        }
    }
}

impl SampleSet {
    pub fn new(model_id: u64) -> Self {
        Self {
            model_id,
            ..Self::default()
        }
    }

    /// Records one trial. `score` is only invoked for unseen configurations.
    pub fn record(&mut self, spins: &[i8], score: impl FnOnce(&[i8]) -> f64) {
        let key = SpinConfig::from_raw_unchecked(spins.to_vec());
        let idx = match self.index.get(&key) {
            Some(&idx) => {
                self.entries[idx].multiplicity += 1;
                idx
            }
            None => {
                let energy = score(spins);
                let idx = self.entries.len();
                self.entries.push(Sample {
                    spins: key.clone(),
                    energy,
                    multiplicity: 1,
                });
                self.index.insert(key, idx);
                idx
            }
        };
        self.sequence.push(idx as u32);
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    /// Entry index produced by each trial, in execution order.
    pub fn sequence(&self) -> &[u32] {
        &self.sequence
    }

    pub fn total_trials(&self) -> u64 {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lowest-energy entry; ties go to the earliest entry.
    pub fn best(&self) -> Option<&Sample> {
        self.entries
            .iter()
            .fold(None, |best: Option<&Sample>, e| match best {
                Some(b) if b.energy <= e.energy => Some(b),
                _ => Some(e),
            })
    }

    /// Appends `other`'s trials after this set's trials.
    pub fn merge(&mut self, other: &SampleSet) {
        for &idx in &other.sequence {
            let e = &other.entries[idx as usize];
            let energy = e.energy;
            self.record(e.spins.spins(), |_| energy);
        }
        // Sets restored from JSON carry no sequence; fold the entries directly.
        if other.sequence.is_empty() {
            for e in &other.entries {
                let energy = e.energy;
                self.record(e.spins.spins(), |_| energy);
                let idx = self.index[&e.spins];
                self.entries[idx].multiplicity += e.multiplicity - 1;
            }
        }
    }

    /// Running minimum of the energy after each trial.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.sequence
            .iter()
            .map(|&i| {
                best = best.min(self.entries[i as usize].energy);
                best
            })
            .collect()
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_duplicates_and_tracks_sequence() {
        let mut set = SampleSet::new(1);
        let mut calls = 0;
        for s in [[1i8, 1], [1, -1], [1, 1]] {
            set.record(&s, |_| {
                calls += 1;
                f64::from(s[1])
            });
        }
        assert_eq!(calls, 2);
        assert_eq!(set.entries().len(), 2);
        assert_eq!(set.total_trials(), 3);
        assert_eq!(set.sequence(), &[0, 1, 0]);
        assert_eq!(set.best().unwrap().energy, -1.0);
        assert_eq!(set.best_so_far(), vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn merge_preserves_trial_counts() {
        let mut a = SampleSet::new(1);
        a.record(&[1, 1], |_| 0.0);
        let mut b = SampleSet::new(2);
        b.record(&[1, 1], |_| 0.0);
        b.record(&[-1, 1], |_| -2.0);
        a.merge(&b);
        assert_eq!(a.total_trials(), 3);
        assert_eq!(a.entries().len(), 2);

        let restored: SampleSet = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        let mut c = SampleSet::new(3);
        c.merge(&restored);
        assert_eq!(c.total_trials(), 2);
    }
}
