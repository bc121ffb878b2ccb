//! Ising Hamiltonians over `{-1, +1}` spins.
//!
//! `IsingModel` keeps its coefficients in sparse ordered maps so iteration
//! order, and therefore every derived quantity, is deterministic. Hot loops
//! (annealing, greedy descent, enumeration) go through [`Adjacency`], a CSR
//! view built once per model.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `E(z) = offset + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    n: usize,
    h: BTreeMap<usize, f64>,
    j: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl IsingModel {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            h: BTreeMap::new(),
            j: BTreeMap::new(),
            offset: 0.0,
        }
    }

    /// Builds a model from explicit term lists, rejecting duplicates,
    /// self-couplings, unordered pairs and out-of-range indices.
    pub fn from_terms(
        n: usize,
        h: impl IntoIterator<Item = (usize, f64)>,
        j: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Result<Self> {
        let mut model = Self::new(n);
        model.offset = offset;
        for (i, v) in h {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if model.h.insert(i, v).is_some() {
                return Err(Error::InvalidModel(format!("duplicate linear term {i}")));
            }
        }
        for (a, b, v) in j {
            if a >= b {
                return Err(Error::InvalidModel(format!(
                    "coupler ({a}, {b}) must satisfy i < j"
                )));
            }
            if b >= n {
                return Err(Error::IndexOutOfRange { index: b, n });
            }
            if model.j.insert((a, b), v).is_some() {
                return Err(Error::InvalidModel(format!("duplicate coupler ({a}, {b})")));
            }
        }
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.h
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.j
    }

    pub fn h(&self, i: usize) -> f64 {
        self.h.get(&i).copied().unwrap_or(0.0)
    }

    /// Coupler value for the unordered pair `{a, b}`.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        let key = if a < b { (a, b) } else { (b, a) };
        self.j.get(&key).copied().unwrap_or(0.0)
    }

    pub fn set_h(&mut self, i: usize, v: f64) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        self.h.insert(i, v);
        Ok(())
    }

    /// Sets the coupler on `{a, b}`; the pair is stored as `(min, max)`.
    pub fn set_j(&mut self, a: usize, b: usize, v: f64) -> Result<()> {
        if a == b {
            return Err(Error::InvalidModel(format!("self-coupling on qubit {a}")));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if key.1 >= self.n {
            return Err(Error::IndexOutOfRange { index: key.1, n: self.n });
        }
        self.j.insert(key, v);
        Ok(())
    }

    pub fn num_couplers(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty() && self.j.is_empty()
    }

    /// Largest absolute linear and quadratic coefficients.
    pub fn max_abs(&self) -> (f64, f64) {
        let mh = self.h.values().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mj = self.j.values().fold(0.0_f64, |m, v| m.max(v.abs()));
        (mh, mj)
    }

    /// Same sparsity pattern and offset, every coefficient rewritten by `f`.
    /// Linear terms are visited before couplers, each in index order.
    pub fn map_coefficients(&self, mut f: impl FnMut(Term, f64) -> f64) -> Self {
        let h = self.h.iter().map(|(&i, &v)| (i, f(Term::Linear(i), v))).collect();
        let j = self
            .j
            .iter()
            .map(|(&(a, b), &v)| ((a, b), f(Term::Coupler(a, b), v)))
            .collect();
        Self {
            n: self.n,
            h,
            j,
            offset: self.offset,
        }
    }

    /// True when both models have exactly the same coefficient positions.
    pub fn same_pattern(&self, other: &IsingModel) -> bool {
        self.n == other.n
            && self.h.keys().eq(other.h.keys())
            && self.j.keys().eq(other.j.keys())
    }

    pub fn energy(&self, z: &SpinConfig) -> Result<f64> {
        self.check_len(z)?;
        let s = z.spins();
        let mut e = self.offset;
        for (&i, &v) in &self.h {
            e += v * f64::from(s[i]);
        }
        for (&(a, b), &v) in &self.j {
            e += v * f64::from(s[a] * s[b]);
        }
        Ok(e)
    }

    /// `f_k = h_k + sum_j J_kj z_j`, couplers counted on both endpoints.
    pub fn local_fields(&self, z: &SpinConfig) -> Result<Vec<f64>> {
        self.check_len(z)?;
        let s = z.spins();
        let mut f = vec![0.0; self.n];
        for (&i, &v) in &self.h {
            f[i] += v;
        }
        for (&(a, b), &v) in &self.j {
            f[a] += v * f64::from(s[b]);
            f[b] += v * f64::from(s[a]);
        }
        Ok(f)
    }

    /// Returns the model with every coefficient and the offset multiplied by `s`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidScale(s));
        }
        let mut out = self.map_coefficients(|_, v| v * s);
        out.offset *= s;
        Ok(out)
    }

    /// Coefficient-wise sum; the union of both sparsity patterns.
    pub fn add(&self, other: &IsingModel) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut out = self.clone();
        for (&i, &v) in &other.h {
            *out.h.entry(i).or_insert(0.0) += v;
        }
        for (&k, &v) in &other.j {
            *out.j.entry(k).or_insert(0.0) += v;
        }
        out.offset += other.offset;
        Ok(out)
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    fn check_len(&self, z: &SpinConfig) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: z.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile::from(self)).expect("model serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ModelFile = serde_json::from_str(s)?;
        raw.try_into()
    }
}

/// Position of a coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    Linear(usize),
    Coupler(usize, usize),
}

/// `ΔE = -2 z_i f_i` for flipping qubit `i`, given maintained local fields.
pub fn flip_delta(z: &SpinConfig, local_fields: &[f64], i: usize) -> Result<f64> {
    let n = z.len();
    if local_fields.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: local_fields.len(),
        });
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(-2.0 * f64::from(z.spins()[i]) * local_fields[i])
}

/// On-disk model layout: `{"n", "h": [[i, v]], "j": [[i, j, v]], "offset"}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    #[serde(default)]
    h: Vec<(usize, f64)>,
    #[serde(default)]
    j: Vec<(usize, usize, f64)>,
    #[serde(default)]
    offset: f64,
}

impl From<&IsingModel> for ModelFile {
    fn from(m: &IsingModel) -> Self {
        Self {
            n: m.n,
            h: m.h.iter().map(|(&i, &v)| (i, v)).collect(),
            j: m.j.iter().map(|(&(a, b), &v)| (a, b, v)).collect(),
            offset: m.offset,
        }
    }
}

impl TryFrom<ModelFile> for IsingModel {
    type Error = Error;

    fn try_from(raw: ModelFile) -> Result<Self> {
        if raw.n == 0 {
            return Err(Error::InvalidModel("n must be positive".into()));
        }
        IsingModel::from_terms(raw.n, raw.h, raw.j, raw.offset)
    }
}

/// A spin assignment with entries in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(i64::from(bad)));
        }
        Ok(Self(spins))
    }

    pub fn uniform(n: usize, spin: i8) -> Result<Self> {
        Self::new(vec![spin; n])
    }

    /// Bit `k` of `bits` set means spin `k` is `+1`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self((0..n).map(|k| if bits >> k & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &SpinConfig) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub(crate) fn from_raw_unchecked(spins: Vec<i8>) -> Self {
        Self(spins)
    }
}

impl Serialize for SpinConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpinConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i8>::deserialize(d)?;
        SpinConfig::new(v).map_err(serde::de::Error::custom)
    }
}

/// Compressed sparse rows of the coupling graph plus a dense linear vector.
#[derive(Clone, Debug)]
pub struct Adjacency {
    h: Vec<f64>,
    offset: f64,
    row_start: Vec<usize>,
    edges: Vec<(usize, f64)>,
}

impl Adjacency {
    pub fn new(model: &IsingModel) -> Self {
        let n = model.n;
        let mut h = vec![0.0; n];
        for (&i, &v) in &model.h {
            h[i] = v;
        }
        let mut degree = vec![0usize; n];
        for &(a, b) in model.j.keys() {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + degree[i];
        }
        let mut fill = row_start.clone();
        let mut edges = vec![(0usize, 0.0); row_start[n]];
        for (&(a, b), &v) in &model.j {
            edges[fill[a]] = (b, v);
            fill[a] += 1;
            edges[fill[b]] = (a, v);
            fill[b] += 1;
        }
        Self {
            h,
            offset: model.offset,
            row_start,
            edges,
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges[self.row_start[i]..self.row_start[i + 1]].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_start[i + 1] - self.row_start[i]
    }

    /// Energy of raw spins; callers guarantee the length.
    pub fn energy(&self, s: &[i8]) -> f64 {
        let mut e = self.offset;
        for i in 0..self.n() {
            let si = f64::from(s[i]);
            let mut pair = 0.0;
            for (k, w) in self.row(i) {
                if k > i {
                    pair += w * f64::from(s[k]);
                }
            }
            e += si * (self.h[i] + pair);
        }
        e
    }

    pub fn local_fields(&self, s: &[i8]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.h[i] + self.row(i).map(|(k, w)| w * f64::from(s[k])).sum::<f64>())
            .collect()
    }

    /// Flips spin `i` in place and updates the neighbors' fields.
    #[inline]
    pub fn flip(&self, s: &mut [i8], fields: &mut [f64], i: usize) {
        s[i] = -s[i];
        let twice = 2.0 * f64::from(s[i]);
        for (k, w) in self.row(i) {
            fields[k] += w * twice;
        }
    }
}

/// Every index touched by a coefficient of `model`.
pub fn active_qubits(model: &IsingModel) -> BTreeSet<usize> {
    model
        .h
        .keys()
        .copied()
        .chain(model.j.keys().flat_map(|&(a, b)| [a, b]))
        .collect()
}
