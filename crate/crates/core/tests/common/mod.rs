#![allow(dead_code)]

use consensus_core::network::{Graph, MixingMatrix, NetworkModel, TopologyKind};
use consensus_core::objectives::{generate_dataset, DataSpec, GroundTruth, Problem, ProblemKind};
use consensus_core::Stacked;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense `(I − W) ⊗ I_m`.
pub fn dense_z(w: &MixingMatrix, m: usize) -> DMatrix<f64> {
    let n = w.size();
    let iw = DMatrix::identity(n, n) - w.dense();
    iw.kronecker(&DMatrix::identity(m, m))
}

pub fn to_vec(s: &Stacked) -> DVector<f64> {
    DVector::from_column_slice(s.as_slice())
}

pub fn from_vec(v: &DVector<f64>, n: usize, m: usize) -> Stacked {
    Stacked::from_flat(n, m, v.as_slice().to_vec()).unwrap()
}

pub fn random_stacked(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> Stacked {
    Stacked::from_flat(n, m, (0..n * m).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Random spanning tree plus random chords.
pub fn random_connected_graph(rng: &mut impl Rng, n: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.25) && !edges.contains(&(i, j)) && !edges.contains(&(j, i)) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).unwrap()
}

pub fn small_spec(kind: ProblemKind, agents: usize, samples: usize, dimension: usize) -> DataSpec {
    let mut spec = DataSpec::benchmark(kind);
    spec.agents = agents;
    spec.samples_per_agent = samples;
    spec.dimension = dimension;
    spec.sparsity = (kind == ProblemKind::ElasticNet).then_some(dimension.min(3));
    spec
}

pub fn small_problem(kind: ProblemKind, agents: usize, samples: usize, dimension: usize, seed: u64) -> (Problem, GroundTruth) {
    generate_dataset(&small_spec(kind, agents, samples, dimension), seed).unwrap()
}

pub fn ring(n: usize) -> NetworkModel {
    NetworkModel::build(TopologyKind::Ring, n, 0).unwrap()
}

/// Smooth gradients of every block, stacked.
pub fn stacked_gradients(problem: &Problem, x: &Stacked) -> Stacked {
    let blocks: Vec<Vec<f64>> = (0..x.agents()).map(|i| problem.smooth_gradient(i, x.block(i)).unwrap()).collect();
    Stacked::from_blocks(&blocks).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
