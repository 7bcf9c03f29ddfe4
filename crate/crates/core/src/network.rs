//! Communication graphs and Metropolis mixing matrices.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::{rng_for, Stream};
use crate::{Error, Result};

/// Absolute tolerance for symmetry and stochasticity of `W`.
pub const MATRIX_TOL: f64 = 1e-12;

const RANDOM_GEOMETRIC_RETRIES: usize = 100;

/// Topology descriptor as it appears in experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyKind {
    Ring,
    Grid { rows: usize, cols: usize },
    RandomGeometric { radius: f64 },
}

impl TopologyKind {
    /// Short label used in file names and tables.
    pub fn label(&self) -> String {
        match self {
            TopologyKind::Ring => "ring".to_string(),
            TopologyKind::Grid { rows, cols } => format!("grid{rows}x{cols}"),
            TopologyKind::RandomGeometric { .. } => "rg".to_string(),
        }
    }
}

/// Connected undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    /// Sorted `(i, j)` pairs with `i < j`.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    /// Node coordinates, only for random geometric graphs.
    positions: Option<Vec<(f64, f64)>>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate and reversed pairs are
    /// merged; self-loops and disconnected results are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let g = Self::assemble(n, edges)?;
        if !g.is_connected() {
            return Err(Error::Construction(format!("graph on {n} nodes is disconnected")));
        }
        Ok(g)
    }

    fn assemble(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::InvalidParameter(format!("self-loop at node {i}")));
            }
            norm.push((i.min(j), i.max(j)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &norm {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        adjacency.iter_mut().for_each(|a| a.sort_unstable());
        Ok(Self { n, edges: norm, adjacency, positions: None })
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(Option::is_some)
    }

    /// Longest shortest path in hops.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|s| self.bfs(s).into_iter().map(|d| d.unwrap_or(usize::MAX)).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Generates a connected topology on `n` nodes.
///
/// Random geometric graphs place `n` points uniformly in the unit square and
/// connect every pair within `radius`; the placement is redrawn from the same
/// seeded stream until the graph is connected, at most 100 times.
pub fn build_topology(kind: TopologyKind, n: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("topology needs n >= 2, got {n}")));
    }
    match kind {
        TopologyKind::Ring => {
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            Graph::from_edges(n, &edges)
        }
        TopologyKind::Grid { rows, cols } => {
            if rows == 0 || cols == 0 || rows * cols != n {
                return Err(Error::InvalidParameter(format!(
                    "grid {rows}x{cols} does not have {n} nodes"
                )));
            }
            let id = |r: usize, c: usize| r * cols + c;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((id(r, c), id(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((id(r, c), id(r + 1, c)));
                    }
                }
            }
            Graph::from_edges(n, &edges)
        }
        TopologyKind::RandomGeometric { radius } => {
            if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
                return Err(Error::InvalidParameter(format!(
                    "random geometric radius {radius} outside (0, sqrt(2)]"
                )));
            }
            let mut rng = rng_for(seed, Stream::Topology);
            for _ in 0..RANDOM_GEOMETRIC_RETRIES {
                let points: Vec<(f64, f64)> =
                    (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
                        if (dx * dx + dy * dy).sqrt() <= radius {
                            edges.push((i, j));
                        }
                    }
                }
                let mut g = Graph::assemble(n, &edges)?;
                if g.is_connected() {
                    g.positions = Some(points);
                    return Ok(g);
                }
            }
            Err(Error::Construction(format!(
                "random geometric graph (n = {n}, r = {radius}) still disconnected after {RANDOM_GEOMETRIC_RETRIES} draws"
            )))
        }
    }
}

/// Symmetric doubly stochastic weights on a graph, with cached spectrum.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    weights: DMatrix<f64>,
    /// Descending.
    eigenvalues: Vec<f64>,
    /// `(j, w_ij)` for every graph neighbor `j` of `i`.
    neighbor_weights: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    /// Wraps an arbitrary dense matrix on `graph`. No validation happens here;
    /// see [`validate_mixing`].
    pub fn from_dense(graph: &Graph, weights: DMatrix<f64>) -> Result<Self> {
        let n = graph.nodes();
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: weights.nrows() });
        }
        let neighbor_weights = (0..n)
            .map(|i| graph.neighbors(i).iter().map(|&j| (j, weights[(i, j)])).collect())
            .collect();
        let sym = (&weights + weights.transpose()) * 0.5;
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { weights, eigenvalues, neighbor_weights })
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.weights[(i, i)]
    }

    pub fn neighbor_weights(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbor_weights[i]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(f64::NAN)
    }

    pub fn lambda_n(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&f64::NAN)
    }
}

/// Metropolis rule: `w_ij = 1 / (1 + max(deg i, deg j))` on edges and the
/// remaining mass on the diagonal.
pub fn metropolis_weights(graph: &Graph) -> MixingMatrix {
    let n = graph.nodes();
    let mut w = DMatrix::zeros(n, n);
    for &(i, j) in graph.edges() {
        let wij = 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64);
        w[(i, j)] = wij;
        w[(j, i)] = wij;
    }
    for i in 0..n {
        let off: f64 = graph.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_dense(graph, w).expect("dimensions match by construction")
}

/// Spectral quantities every stepsize rule reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda_2: f64,
    pub lambda_n: f64,
    /// `max(|λ₂|, |λₙ|)`.
    pub zeta: f64,
    pub spectral_gap: f64,
    /// `‖Z‖₂ = 1 - λₙ`.
    pub kappa_z: f64,
    pub diameter: usize,
}

/// Checks sparsity, symmetry, double stochasticity and `-I ≺ W ≼ I` with a
/// simple unit eigenvalue, then summarises the spectrum.
pub fn validate_mixing(w: &MixingMatrix, graph: &Graph) -> Result<SpectralReport> {
    let n = graph.nodes();
    let dense = w.dense();
    if w.size() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: w.size() });
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = dense[(i, j)];
            if graph.has_edge(i, j) {
                if !(wij > 0.0) {
                    return Err(Error::MixingValidation {
                        condition: "positive weight on every edge",
                        detail: format!("w[{i}][{j}] = {wij}"),
                    });
                }
            } else if wij != 0.0 {
                return Err(Error::MixingValidation {
                    condition: "zero weight off the graph",
                    detail: format!("w[{i}][{j}] = {wij} but ({i}, {j}) is not an edge"),
                });
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let diff = (dense[(i, j)] - dense[(j, i)]).abs();
            if diff > MATRIX_TOL {
                return Err(Error::MixingValidation {
                    condition: "symmetry",
                    detail: format!("|w[{i}][{j}] - w[{j}][{i}]| = {diff:e}"),
                });
            }
        }
    }
    for i in 0..n {
        let row: f64 = dense.row(i).sum();
        let col: f64 = dense.column(i).sum();
        for (what, sum) in [("row", row), ("column", col)] {
            if (sum - 1.0).abs() > MATRIX_TOL {
                return Err(Error::MixingValidation {
                    condition: "double stochasticity",
                    detail: format!("{what} {i} sums to {sum}"),
                });
            }
        }
    }
    let eig = w.eigenvalues();
    let lambda_1 = eig[0];
    let lambda_n = w.lambda_n();
    if (lambda_1 - 1.0).abs() > 1e-9 {
        return Err(Error::MixingValidation {
            condition: "largest eigenvalue equal to one",
            detail: format!("lambda_1 = {lambda_1}"),
        });
    }
    if !(lambda_n > -1.0 + 1e-9) {
        return Err(Error::MixingValidation {
            condition: "smallest eigenvalue above -1",
            detail: format!("lambda_n = {lambda_n}"),
        });
    }
    let lambda_2 = if n > 1 { eig[1] } else { 0.0 };
    if n > 1 && !(lambda_2 < 1.0 - 1e-9) {
        return Err(Error::MixingValidation {
            condition: "simple unit eigenvalue",
            detail: format!("lambda_2 = {lambda_2}"),
        });
    }
    let zeta = if n > 1 { lambda_2.abs().max(lambda_n.abs()) } else { 0.0 };
    Ok(SpectralReport {
        lambda_2,
        lambda_n,
        zeta,
        spectral_gap: 1.0 - zeta,
        kappa_z: 1.0 - lambda_n,
        diameter: graph.diameter(),
    })
}

/// A validated graph with its Metropolis matrix and spectral summary.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub graph: Graph,
    pub mixing: MixingMatrix,
    pub spectral: SpectralReport,
    /// Topology name used in reports.
    pub label: String,
}

impl NetworkModel {
    /// Metropolis-weighted model of an arbitrary connected graph.
    pub fn new(graph: Graph) -> Result<Self> {
        let mixing = metropolis_weights(&graph);
        let spectral = validate_mixing(&mixing, &graph)?;
        Ok(Self { graph, mixing, spectral, label: "custom".into() })
    }

    pub fn build(kind: TopologyKind, n: usize, seed: u64) -> Result<Self> {
        Ok(Self { label: kind.label(), ..Self::new(build_topology(kind, n, seed)?)? })
    }

    /// Single agent with `W = [1]`.
    pub fn single_agent() -> Self {
        let graph = Graph { n: 1, edges: vec![], adjacency: vec![vec![]], positions: None };
        let mixing = metropolis_weights(&graph);
        let spectral = SpectralReport {
            lambda_2: 0.0,
            lambda_n: 1.0,
            zeta: 0.0,
            spectral_gap: 1.0,
            kappa_z: 0.0,
            diameter: 0,
        };
        Self { graph, mixing, spectral, label: "single".into() }
    }

    pub fn agents(&self) -> usize {
        self.graph.nodes()
    }
}
