//! Benchmark instance generators: Chimera hardware graphs, SK spin glasses
//! and the Max-Cut casting.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinConfig};
use crate::seed::rng_from_seed;

/// Weighted undirected graph with edges stored as `(i, j, w)`, `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    #[serde(rename = "n")]
    node_count: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidSize("graph needs at least one node".into()));
        }
        let mut seen = BTreeSet::new();
        for &(i, j, _) in &edges {
            if i >= j {
                return Err(Error::InvalidSpec(format!("edge ({i}, {j}) must satisfy i < j")));
            }
            if j >= node_count {
                return Err(Error::IndexOutOfRange { index: j, n: node_count });
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidSpec(format!("duplicate edge ({i}, {j})")));
            }
        }
        Ok(Self { node_count, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(i, j, _)| i == v || j == v).count()
    }

    /// Drops `dead` nodes and compacts the remaining indices in order.
    pub fn without_nodes(&self, dead: &[usize]) -> Result<Graph> {
        let dead: BTreeSet<usize> = dead.iter().copied().collect();
        if let Some(&bad) = dead.iter().find(|&&d| d >= self.node_count) {
            return Err(Error::IndexOutOfRange { index: bad, n: self.node_count });
        }
        let mut relabel = vec![usize::MAX; self.node_count];
        let mut next = 0;
        for (v, slot) in relabel.iter_mut().enumerate() {
            if !dead.contains(&v) {
                *slot = next;
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|(i, j, _)| !dead.contains(i) && !dead.contains(j))
            .map(|&(i, j, w)| (relabel[i], relabel[j], w))
            .collect();
        Graph::new(next, edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            n: usize,
            edges: Vec<(usize, usize, f64)>,
        }
        let raw: Raw = serde_json::from_str(s)?;
        Graph::new(raw.n, raw.edges)
    }
}

/// Chimera `C_m`: an `m x m` grid of `K_{4,4}` unit cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChimeraSpec {
    pub m: usize,
}

impl ChimeraSpec {
    pub const CELL: usize = 8;
    pub const SHORE: usize = 4;

    pub fn new(m: usize) -> Result<Self> {
        let spec = Self { m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidSpec("chimera grid dimension must be >= 1".into()));
        }
        Ok(())
    }

    pub fn qubits(&self) -> usize {
        Self::CELL * self.m * self.m
    }

    pub fn couplers(&self) -> usize {
        16 * self.m * self.m + 8 * self.m * (self.m - 1)
    }

    /// Linear index of shore position `k` (0..8) in cell `(row, col)`.
    pub fn index(&self, row: usize, col: usize, k: usize) -> usize {
        Self::CELL * (row * self.m + col) + k
    }
}

pub fn chimera_graph(spec: ChimeraSpec) -> Result<Graph> {
    spec.validate()?;
    let m = spec.m;
    let mut edges = Vec::with_capacity(spec.couplers());
    for row in 0..m {
        for col in 0..m {
            for l in 0..ChimeraSpec::SHORE {
                for r in ChimeraSpec::SHORE..ChimeraSpec::CELL {
                    edges.push((spec.index(row, col, l), spec.index(row, col, r), 1.0));
                }
            }
            // vertical couplers join the left shores of row-adjacent cells
            if row + 1 < m {
                for l in 0..ChimeraSpec::SHORE {
                    edges.push((spec.index(row, col, l), spec.index(row + 1, col, l), 1.0));
                }
            }
            // horizontal couplers join the right shores of column-adjacent cells
            if col + 1 < m {
                for r in ChimeraSpec::SHORE..ChimeraSpec::CELL {
                    edges.push((spec.index(row, col, r), spec.index(row, col + 1, r), 1.0));
                }
            }
        }
    }
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Graph::new(spec.qubits(), edges)
}

/// Options for drawing random instances on a fixed graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceOptions {
    /// Skip the linear terms and draw couplers only.
    #[serde(default)]
    pub couplers_only: bool,
    /// Qubits removed after generation (hardware yield).
    #[serde(default)]
    pub dead_qubits: Vec<usize>,
}

/// Standard-normal `h` on every node (unless `couplers_only`) and `J` on every edge.
/// Linear terms are drawn first in node order, then couplers in edge order.
pub fn random_instance(graph: &Graph, seed: u64, couplers_only: bool) -> IsingModel {
    let mut rng = rng_from_seed(seed);
    let mut model = IsingModel::new(graph.node_count());
    if !couplers_only {
        for i in 0..graph.node_count() {
            let v: f64 = rng.sample(StandardNormal);
            model.set_h(i, v).expect("node index within graph");
        }
    }
    for &(i, j, _) in graph.edges() {
        let v: f64 = rng.sample(StandardNormal);
        model.set_j(i, j, v).expect("edge within graph");
    }
    model
}

pub fn random_chimera_instance(spec: ChimeraSpec, seed: u64) -> Result<IsingModel> {
    random_chimera_instance_with(spec, seed, &InstanceOptions::default())
}

pub fn random_chimera_instance_with(
    spec: ChimeraSpec,
    seed: u64,
    opts: &InstanceOptions,
) -> Result<IsingModel> {
    let mut graph = chimera_graph(spec)?;
    if !opts.dead_qubits.is_empty() {
        graph = graph.without_nodes(&opts.dead_qubits)?;
    }
    Ok(random_instance(&graph, seed, opts.couplers_only))
}

/// Complete graph on `n` nodes with standard-normal edge weights.
pub fn sk_maxcut_graph(n: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("SK graph needs n >= 2, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((i, j, rng.sample(StandardNormal)));
        }
    }
    Graph::new(n, edges)
}

/// Ising form of weighted Max-Cut with `energy(z) == -cut(z)`.
pub fn cast_maxcut(g: &Graph) -> IsingModel {
    let mut model = IsingModel::new(g.node_count());
    let mut total = 0.0;
    for &(i, j, w) in g.edges() {
        model.set_j(i, j, w / 2.0).expect("graph edges are valid");
        total += w;
    }
    model.set_offset(-total / 2.0);
    model
}

pub fn cut_value(g: &Graph, z: &SpinConfig) -> Result<f64> {
    if z.len() != g.node_count() {
        return Err(Error::LengthMismatch {
            expected: g.node_count(),
            found: z.len(),
        });
    }
    let s = z.spins();
    Ok(g.edges()
        .iter()
        .map(|&(i, j, w)| w * f64::from(1 - s[i] * s[j]) / 2.0)
        .sum())
}
