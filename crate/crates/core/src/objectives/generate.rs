use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Objective, Problem, ProblemKind};
use crate::seed::{rng_for, Stream};
use crate::{Error, Result};

/// Parameters of the synthetic benchmark generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: ProblemKind,
    pub agents: usize,
    pub samples_per_agent: usize,
    pub dimension: usize,
    /// Number of nonzeros in `x_true`; `None` draws a dense vector.
    #[serde(default)]
    pub sparsity: Option<usize>,
    #[serde(default = "defaults::response_noise")]
    pub response_noise: f64,
    #[serde(default = "defaults::label_noise")]
    pub label_noise: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::l1")]
    pub l1: f64,
    #[serde(default = "defaults::l2")]
    pub l2: f64,
}

pub(crate) mod defaults {
    pub fn response_noise() -> f64 {
        0.1
    }
    pub fn label_noise() -> f64 {
        0.5
    }
    pub fn lambda() -> f64 {
        1e-2
    }
    pub fn l1() -> f64 {
        5e-3
    }
    pub fn l2() -> f64 {
        1e-2
    }
}

impl DataSpec {
    /// Benchmark defaults: 20 agents with 500 samples of dimension 50; the
    /// elastic net uses a 15-sparse ground truth.
    pub fn benchmark(kind: ProblemKind) -> Self {
        Self {
            kind,
            agents: 20,
            samples_per_agent: 500,
            dimension: 50,
            sparsity: (kind == ProblemKind::ElasticNet).then_some(15),
            response_noise: defaults::response_noise(),
            label_noise: defaults::label_noise(),
            lambda: defaults::lambda(),
            l1: defaults::l1(),
            l2: defaults::l2(),
        }
    }

    pub fn objective(&self) -> Objective {
        match self.kind {
            ProblemKind::Ridge => Objective::Ridge { lambda: self.lambda },
            ProblemKind::Logistic => Objective::Logistic,
            ProblemKind::ElasticNet => Objective::ElasticNet { l1: self.l1, l2: self.l2 },
        }
    }
}

/// The vector the data were generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub x_true: Vec<f64>,
    /// Sorted indices of the nonzero entries of `x_true`.
    pub support: Vec<usize>,
    pub noise_sigma: f64,
}

/// Draws a synthetic dataset and scales it to unit Lipschitz constant.
///
/// Draw order from the data stream: the support (if sparse), the entries of
/// `x_true`, then agent by agent the feature matrix row by row followed by
/// that agent's noise terms.
pub fn generate_dataset(spec: &DataSpec, seed: u64) -> Result<(Problem, GroundTruth)> {
    let (n, d, m) = (spec.agents, spec.samples_per_agent, spec.dimension);
    if n == 0 || d == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("agents, samples and dimension must be >= 1, got ({n}, {d}, {m})")));
    }
    if let Some(s) = spec.sparsity {
        if s > m {
            return Err(Error::InvalidParameter(format!("sparsity {s} exceeds dimension {m}")));
        }
    }
    if !(spec.response_noise >= 0.0 && spec.label_noise >= 0.0) {
        return Err(Error::InvalidParameter("noise scales must be >= 0".into()));
    }
    let mut rng = rng_for(seed, Stream::Data);

    let mut x_true = vec![0.0; m];
    let support: Vec<usize> = match spec.sparsity {
        Some(s) => {
            let mut idx = index::sample(&mut rng, m, s).into_vec();
            idx.sort_unstable();
            idx
        }
        None => (0..m).collect(),
    };
    for &j in &support {
        x_true[j] = rng.sample(StandardNormal);
    }
    // A dense draw can still hit an exact zero in principle; report the truth.
    let support: Vec<usize> = support.into_iter().filter(|&j| x_true[j] != 0.0).collect();
    let xt = DVector::from_column_slice(&x_true);

    let noise_sigma = match spec.kind {
        ProblemKind::Logistic => spec.label_noise,
        _ => spec.response_noise,
    };
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut shards = Vec::with_capacity(n);
    for _ in 0..n {
        let rows: Vec<f64> = (0..d * m).map(|_| rng.sample(StandardNormal)).collect();
        let a = DMatrix::from_row_slice(d, m, &rows);
        let clean = &a * &xt;
        let b = match spec.kind {
            ProblemKind::Logistic => DVector::from_iterator(
                d,
                clean.iter().map(|&z| if z + noise.sample(&mut rng) >= 0.0 { 1.0 } else { -1.0 }),
            ),
            _ => DVector::from_iterator(d, clean.iter().map(|&z| z + noise.sample(&mut rng))),
        };
        shards.push((a, b));
    }
    let problem = Problem::new(spec.objective(), shards)?.scale_to_unit_lipschitz();
    Ok((problem, GroundTruth { x_true, support, noise_sigma }))
}
