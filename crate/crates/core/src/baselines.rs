//! Reference decentralized methods sharing the problem, network and
//! metrics interfaces: DGD with fixed and diminishing steps, EXTRA and NIDS.
//! Each iteration costs one neighbor exchange.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{metrics_with_gradients, Reference};
use crate::network::{MixingMatrix, NetworkModel};
use crate::noise::inject_noise;
use crate::objectives::{Problem, ProblemKind};
use crate::record::{Algorithm, RunRecord};
use crate::seed::{rng_for, Stream};
use crate::stacked::Stacked;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    DgdFixed,
    DgdDiminishing,
    Extra,
    Nids,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] =
        [BaselineKind::DgdFixed, BaselineKind::DgdDiminishing, BaselineKind::Nids, BaselineKind::Extra];

    pub fn algorithm(self) -> Algorithm {
        match self {
            BaselineKind::DgdFixed => Algorithm::DgdFixed,
            BaselineKind::DgdDiminishing => Algorithm::DgdDiminishing,
            BaselineKind::Extra => Algorithm::Extra,
            BaselineKind::Nids => Algorithm::Nids,
        }
    }

    pub fn from_algorithm(algorithm: Algorithm) -> Option<Self> {
        match algorithm {
            Algorithm::DgdFixed => Some(BaselineKind::DgdFixed),
            Algorithm::DgdDiminishing => Some(BaselineKind::DgdDiminishing),
            Algorithm::Extra => Some(BaselineKind::Extra),
            Algorithm::Nids => Some(BaselineKind::Nids),
            Algorithm::Dp2g => None,
        }
    }

    /// Default (base) stepsize for smoothness `l_max` and smallest mixing
    /// eigenvalue `lambda_n`.
    pub fn default_alpha(self, l_max: f64, lambda_n: f64) -> f64 {
        match self {
            BaselineKind::DgdFixed | BaselineKind::Extra => 0.9 * (1.0 + lambda_n) / l_max,
            BaselineKind::DgdDiminishing => 2.0 * (1.0 + lambda_n) / l_max,
            BaselineKind::Nids => 0.9 / l_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub algorithm: BaselineKind,
    /// Overrides the default stepsize (the base `α₀` for diminishing DGD).
    #[serde(default)]
    pub alpha0: Option<f64>,
    #[serde(default = "default_round_cap")]
    pub round_cap: usize,
    #[serde(default)]
    pub comm_sigma: f64,
    /// Run on the elastic net anyway, applying the prox after each step.
    #[serde(default)]
    pub force_nonsmooth: bool,
}

fn default_round_cap() -> usize {
    5000
}

impl BaselineConfig {
    pub fn new(algorithm: BaselineKind) -> Self {
        Self { algorithm, alpha0: None, round_cap: default_round_cap(), comm_sigma: 0.0, force_nonsmooth: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.round_cap == 0 {
            return Err(Error::InvalidParameter("round_cap must be positive".into()));
        }
        if !(self.comm_sigma >= 0.0 && self.comm_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("comm_sigma must be >= 0, got {}", self.comm_sigma)));
        }
        if let Some(a) = self.alpha0 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("alpha0 must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

/// Accuracy a baseline must reach to count as converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub consensus_violation: f64,
    pub optimality_residual: f64,
}

/// `(W ⊗ I) x`, one neighbor exchange.
pub fn mix(x: &Stacked, w: &MixingMatrix) -> Stacked {
    let mut out = Stacked::zeros(x.agents(), x.dim());
    mix_into(x, w, &mut out);
    out
}

fn mix_into(x: &Stacked, w: &MixingMatrix, out: &mut Stacked) {
    for i in 0..x.agents() {
        let self_w = w.self_weight(i);
        let row = out.block_mut(i);
        row.iter_mut().zip(x.block(i)).for_each(|(o, v)| *o = self_w * v);
        for &(j, wij) in w.neighbor_weights(i) {
            row.iter_mut().zip(x.block(j)).for_each(|(o, v)| *o += wij * v);
        }
    }
}

fn gradients(x: &Stacked, problem: &Problem) -> Stacked {
    let mut g = Stacked::zeros(x.agents(), x.dim());
    for i in 0..x.agents() {
        problem.smooth_gradient_into(i, x.block(i), g.block_mut(i));
    }
    g
}

/// `x_i ← Σ_j w_ij x_j − α ∇f_i(x_i)`.
pub fn dgd_fixed_step(x: &Stacked, w: &MixingMatrix, problem: &Problem, alpha: f64) -> Stacked {
    let mut next = mix(x, w);
    let g = gradients(x, problem);
    next.as_mut_slice().iter_mut().zip(g.as_slice()).for_each(|(n, gi)| *n -= alpha * gi);
    next
}

/// `α_k = α₀ / √k` for `k ≥ 1`.
pub fn dgd_diminishing_step(k: usize, alpha0: f64) -> f64 {
    assert!(k >= 1, "diminishing steps are indexed from 1");
    alpha0 / (k as f64).sqrt()
}

/// `x⁺ = (I + W) x − W̃ x_prev − α(∇F(x) − ∇F(x_prev))` with `W̃ = (W + I)/2`.
pub fn extra_step(x_curr: &Stacked, x_prev: &Stacked, w: &MixingMatrix, problem: &Problem, alpha: f64) -> Stacked {
    let wc = mix(x_curr, w);
    let wp = mix(x_prev, w);
    let gc = gradients(x_curr, problem);
    let gp = gradients(x_prev, problem);
    let mut next = Stacked::zeros(x_curr.agents(), x_curr.dim());
    for (k, out) in next.as_mut_slice().iter_mut().enumerate() {
        let (c, p) = (x_curr.as_slice()[k], x_prev.as_slice()[k]);
        *out = c + wc.as_slice()[k] - 0.5 * (p + wp.as_slice()[k]) - alpha * (gc.as_slice()[k] - gp.as_slice()[k]);
    }
    next
}

/// `x⁺ = W̃ (2x − x_prev − α(∇F(x) − ∇F(x_prev)))` with `W̃ = (W + I)/2`.
pub fn nids_step(
    x_curr: &Stacked,
    x_prev: &Stacked,
    grad_curr: &Stacked,
    grad_prev: &Stacked,
    w: &MixingMatrix,
    alpha: f64,
) -> Stacked {
    let mut message = Stacked::zeros(x_curr.agents(), x_curr.dim());
    for (k, out) in message.as_mut_slice().iter_mut().enumerate() {
        *out = 2.0 * x_curr.as_slice()[k]
            - x_prev.as_slice()[k]
            - alpha * (grad_curr.as_slice()[k] - grad_prev.as_slice()[k]);
    }
    let mixed = mix(&message, w);
    half_average(&message, &mixed)
}

fn half_average(a: &Stacked, b: &Stacked) -> Stacked {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect();
    Stacked::from_flat(a.agents(), a.dim(), data).expect("shapes match")
}

/// Iterates until both the consensus violation and the optimality residual
/// are at or below `targets`, or the round cap is reached. Noise perturbs
/// the neighbor-averaged message each agent receives.
pub fn run_baseline(
    config: &BaselineConfig,
    problem: &Problem,
    network: &NetworkModel,
    reference: &Reference,
    targets: Targets,
    seed: u64,
) -> Result<RunRecord> {
    config.validate()?;
    let kind = config.algorithm;
    if problem.kind() == ProblemKind::ElasticNet && !config.force_nonsmooth {
        return Err(Error::InvalidParameter(format!(
            "{} is not run on the elastic net unless force_nonsmooth is set",
            kind.algorithm().label()
        )));
    }
    let started = Instant::now();
    let w = &network.mixing;
    let (n, m) = (problem.agents(), problem.dim());
    let l_max = problem.lipschitz_max();
    let alpha = match config.alpha0 {
        Some(a) => a,
        None if l_max > 0.0 => kind.default_alpha(l_max, network.spectral.lambda_n),
        None => 1.0,
    };
    let mut rng = rng_for(seed, Stream::Noise);
    let mut record = RunRecord::new(kind.algorithm(), problem.kind(), network.label.clone(), seed);

    let mut x = Stacked::zeros(n, m);
    let mut grad = gradients(&x, problem);
    let mut x_prev = x.clone();
    let mut grad_prev = grad.clone();
    let mut mixed = Stacked::zeros(n, m);
    let mut mixed_prev = Stacked::zeros(n, m);
    let mut message = Stacked::zeros(n, m);
    let mut next = Stacked::zeros(n, m);

    let reached = |s: &crate::diagnostics::MetricsSample| {
        s.consensus_violation <= targets.consensus_violation && s.optimality_residual <= targets.optimality_residual
    };
    let sample = metrics_with_gradients(&x, None, 0.0, problem, w, reference, 0, &grad);
    let mut converged = reached(&sample);
    record.push_sample(sample);

    let mut rounds = 0;
    while !converged && rounds < config.round_cap {
        let k = rounds;
        // Exchange: agents receive the neighbor average of `message`.
        let send: &Stacked = match kind {
            BaselineKind::Nids if k > 0 => {
                for (idx, out) in message.as_mut_slice().iter_mut().enumerate() {
                    *out = 2.0 * x.as_slice()[idx]
                        - x_prev.as_slice()[idx]
                        - alpha * (grad.as_slice()[idx] - grad_prev.as_slice()[idx]);
                }
                &message
            }
            _ => &x,
        };
        mix_into(send, w, &mut mixed);
        for i in 0..n {
            inject_noise(mixed.block_mut(i), config.comm_sigma, &mut rng);
        }
        rounds += 1;

        let step = match kind {
            BaselineKind::DgdDiminishing => dgd_diminishing_step(k + 1, alpha),
            _ => alpha,
        };
        let (xs, ms, gs) = (x.as_slice(), mixed.as_slice(), grad.as_slice());
        let (ps, mps, gps) = (x_prev.as_slice(), mixed_prev.as_slice(), grad_prev.as_slice());
        for (idx, out) in next.as_mut_slice().iter_mut().enumerate() {
            *out = match kind {
                BaselineKind::DgdFixed | BaselineKind::DgdDiminishing => ms[idx] - step * gs[idx],
                BaselineKind::Extra if k == 0 => ms[idx] - step * gs[idx],
                BaselineKind::Extra => {
                    xs[idx] + ms[idx] - 0.5 * (ps[idx] + mps[idx]) - step * (gs[idx] - gps[idx])
                }
                BaselineKind::Nids if k == 0 => xs[idx] - step * gs[idx],
                BaselineKind::Nids => 0.5 * (message.as_slice()[idx] + ms[idx]),
            };
        }
        if problem.kind() == ProblemKind::ElasticNet {
            for i in 0..n {
                problem.local_prox_in_place(step, next.block_mut(i));
            }
        }
        if !next.is_finite() {
            return Err(Error::Divergence { round: rounds, what: format!("{} iterate", kind.algorithm().label()) });
        }
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut next);
        std::mem::swap(&mut mixed_prev, &mut mixed);
        std::mem::swap(&mut grad_prev, &mut grad);
        for i in 0..n {
            problem.smooth_gradient_into(i, x.block(i), grad.block_mut(i));
        }
        let sample = metrics_with_gradients(&x, None, 0.0, problem, w, reference, rounds, &grad);
        converged = reached(&sample);
        record.push_sample(sample);
    }

    record.summary.converged = converged;
    record.summary.capped = !converged;
    record.summary.total_rounds = rounds;
    record.summary.inner_iterations = rounds;
    record.summary.outer_iterations = rounds;
    record.summary.wall_time_secs = started.elapsed().as_secs_f64();
    record.final_states = x.to_blocks();
    Ok(record)
}
