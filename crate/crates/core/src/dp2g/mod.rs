//! Two-layer exact-penalty solver: a primal-dual proximal-gradient inner
//! loop run at a fixed penalty, wrapped in geometric penalty continuation.

mod max_consensus;
mod steps;

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use max_consensus::max_consensus;
pub use steps::{
    default_stepsizes, dual_step, extrapolate, hybrid_threshold, penalty_update, primal_step, updates_to_cap,
    AgentState, HybridParams, StepSizes, DEFAULT_ALPHA_FACTOR, DEFAULT_SIGMA_FRACTION,
    ELASTIC_NET_SIGMA_FRACTION,
};
use steps::{dual_update, extrapolate_into, primal_update, stepsizes_with_factor};

use crate::diagnostics::{metrics_with_gradients, Reference};
use crate::disagreement::row_residual_into;
use crate::network::NetworkModel;
use crate::noise::inject_noise;
use crate::objectives::{Problem, ProblemKind};
use crate::record::{Algorithm, RunRecord};
use crate::seed::{rng_for, Stream};
use crate::stacked::Stacked;
use crate::{Error, Result};

/// Penalty continuation and tolerance schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedules {
    pub rho0: f64,
    pub beta: f64,
    pub rho_max: f64,
    /// Stationarity tolerance `ε_k = eps0 / (k + 1)` for outer index `k ≥ 0`.
    pub eps0: f64,
    /// Consensus tolerance `δ_k = delta0 / (k + 1)²`.
    pub delta0: f64,
    pub hybrid: HybridParams,
    /// Fraction of agents that must be under their threshold.
    pub quorum: f64,
    /// Stragglers may exceed their threshold by at most this factor.
    pub worst_case_slack: f64,
    /// Averaged iterates must move less than `stabilization · δ_k`.
    pub stabilization: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Self {
            rho0: 1e-2,
            beta: 1.2,
            rho_max: 100.0,
            eps0: 0.1,
            delta0: 0.1,
            hybrid: HybridParams::default(),
            quorum: 0.95,
            worst_case_slack: 10.0,
            stabilization: 1e-3,
        }
    }
}

impl Schedules {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::InvalidParameter(msg)) };
        check(self.beta > 1.0 && self.beta.is_finite(), format!("beta must exceed 1, got {}", self.beta))?;
        check(
            self.rho0 > 0.0 && self.rho0 <= self.rho_max && self.rho_max.is_finite(),
            format!("need 0 < rho0 <= rho_max < inf, got rho0 = {}, rho_max = {}", self.rho0, self.rho_max),
        )?;
        check(self.eps0 > 0.0 && self.delta0 > 0.0, "eps0 and delta0 must be positive".into())?;
        check(self.quorum > 0.0 && self.quorum <= 1.0, format!("quorum must lie in (0, 1], got {}", self.quorum))?;
        check(self.worst_case_slack >= 1.0, format!("worst_case_slack must be >= 1, got {}", self.worst_case_slack))?;
        check(self.stabilization > 0.0, "stabilization must be positive".into())?;
        let h = &self.hybrid;
        check(
            h.eps_abs > 0.0 && h.eps_rel >= 0.0 && h.beta_pen >= 0.0,
            "hybrid parameters need eps_abs > 0, eps_rel >= 0, beta_pen >= 0".into(),
        )
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps0 / (k + 1) as f64
    }

    pub fn delta(&self, k: usize) -> f64 {
        let k = (k + 1) as f64;
        self.delta0 / (k * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMode {
    /// Every agent's residual below `ε_k`.
    Strict,
    /// Quorum of agents below an adaptive threshold, stragglers bounded.
    #[default]
    Hybrid,
}

/// Inner-loop stopping rule at a given outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerStopping {
    Strict { eps: f64 },
    Hybrid { params: HybridParams, rho_max: f64, quorum: f64, slack: f64 },
}

impl InnerStopping {
    pub fn for_outer(mode: StoppingMode, schedules: &Schedules, k: usize) -> Self {
        match mode {
            StoppingMode::Strict => InnerStopping::Strict { eps: schedules.eps(k) },
            StoppingMode::Hybrid => InnerStopping::Hybrid {
                params: schedules.hybrid,
                rho_max: schedules.rho_max,
                quorum: schedules.quorum,
                slack: schedules.worst_case_slack,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStopReason {
    QuorumMet,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    pub iterations: usize,
    pub communication_rounds: usize,
    pub residuals: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub converged: bool,
    pub reason: InnerStopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dp2gConfig {
    pub schedules: Schedules,
    pub stopping: StoppingMode,
    /// `α = alpha_factor / L_max`.
    pub alpha_factor: f64,
    /// `σ = sigma_fraction / (α κ_Z²)`; defaults depend on the objective.
    pub sigma_fraction: Option<f64>,
    pub inner_cap: usize,
    pub round_cap: usize,
    pub comm_sigma: f64,
    /// Max-consensus rounds beyond the graph diameter.
    pub max_consensus_margin: usize,
}

impl Default for Dp2gConfig {
    fn default() -> Self {
        Self {
            schedules: Schedules::default(),
            stopping: StoppingMode::Hybrid,
            alpha_factor: DEFAULT_ALPHA_FACTOR,
            sigma_fraction: None,
            inner_cap: 2000,
            round_cap: 5000,
            comm_sigma: 0.0,
            max_consensus_margin: 2,
        }
    }
}

impl Dp2gConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedules.validate()?;
        if self.inner_cap == 0 || self.round_cap == 0 {
            return Err(Error::InvalidParameter("inner_cap and round_cap must be positive".into()));
        }
        if !(self.comm_sigma >= 0.0 && self.comm_sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("comm_sigma must be >= 0, got {}", self.comm_sigma)));
        }
        Ok(())
    }

    pub fn sigma_fraction_for(&self, kind: ProblemKind) -> f64 {
        self.sigma_fraction.unwrap_or(match kind {
            ProblemKind::ElasticNet => ELASTIC_NET_SIGMA_FRACTION,
            _ => DEFAULT_SIGMA_FRACTION,
        })
    }

    pub fn stepsizes(&self, problem: &Problem, network: &NetworkModel) -> Result<StepSizes> {
        let steps = stepsizes_with_factor(
            problem.lipschitz_max(),
            &network.spectral,
            self.alpha_factor,
            self.sigma_fraction_for(problem.kind()),
        )?;
        steps.validate(problem.lipschitz_max(), network.spectral.kappa_z)?;
        Ok(steps)
    }
}

/// Snapshot handed to observers.
pub struct IterationView<'s> {
    pub outer: usize,
    /// Inner iteration index `t`; the state shown is `(xᵗ, yᵗ)`.
    pub inner: usize,
    pub rho: f64,
    pub rounds: usize,
    pub x: &'s Stacked,
    pub y: &'s Stacked,
    /// `∇f_i(x_i)` at the state shown.
    pub grads: &'s Stacked,
}

pub trait Observer {
    /// Called with `(x⁰, y⁰)` before each inner loop.
    fn inner_start(&mut self, _view: &IterationView<'_>) {}
    /// Called after every inner iteration.
    fn iteration(&mut self, _view: &IterationView<'_>) {}
}

impl Observer for () {}

/// Synchronous simulation of all agents. State is kept stacked; per-agent
/// updates only read their own block and received messages.
pub struct Dp2gSolver<'a> {
    problem: &'a Problem,
    network: &'a NetworkModel,
    steps: StepSizes,
    comm_sigma: f64,
    rng: ChaCha8Rng,
    x: Stacked,
    y: Stacked,
    x_bar: Stacked,
    x_prev: Stacked,
    grads: Stacked,
    rounds: usize,
    outer: usize,
}

impl<'a> Dp2gSolver<'a> {
    /// Solver at `x = 0`, `y = 0` with noise drawn from the run seed's noise
    /// stream.
    pub fn new(
        problem: &'a Problem,
        network: &'a NetworkModel,
        steps: StepSizes,
        comm_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        let (n, m) = (problem.agents(), problem.dim());
        if network.agents() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: network.agents() });
        }
        let mut solver = Self {
            problem,
            network,
            steps,
            comm_sigma,
            rng: rng_for(seed, Stream::Noise),
            x: Stacked::zeros(n, m),
            y: Stacked::zeros(n, m),
            x_bar: Stacked::zeros(n, m),
            x_prev: Stacked::zeros(n, m),
            grads: Stacked::zeros(n, m),
            rounds: 0,
            outer: 0,
        };
        solver.refresh_gradients();
        Ok(solver)
    }

    /// Replaces the primal-dual pair, e.g. for a warm start.
    pub fn set_state(&mut self, x: Stacked, y: Stacked) -> Result<()> {
        let shape = (self.problem.agents(), self.problem.dim());
        for s in [&x, &y] {
            if (s.agents(), s.dim()) != shape {
                return Err(Error::DimensionMismatch { expected: shape.0 * shape.1, actual: s.agents() * s.dim() });
            }
        }
        self.x = x;
        self.y = y;
        self.refresh_gradients();
        Ok(())
    }

    pub fn x(&self) -> &Stacked {
        &self.x
    }

    pub fn y(&self) -> &Stacked {
        &self.y
    }

    pub fn gradients(&self) -> &Stacked {
        &self.grads
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn steps(&self) -> StepSizes {
        self.steps
    }

    pub fn agent_states(&self) -> Vec<AgentState> {
        (0..self.x.agents())
            .map(|i| AgentState {
                x: self.x.block(i).to_vec(),
                y: self.y.block(i).to_vec(),
                x_bar: self.x_bar.block(i).to_vec(),
                x_prev: self.x_prev.block(i).to_vec(),
            })
            .collect()
    }

    fn refresh_gradients(&mut self) {
        for i in 0..self.x.agents() {
            self.problem.smooth_gradient_into(i, self.x.block(i), self.grads.block_mut(i));
        }
    }

    fn view(&self, inner: usize, rho: f64) -> IterationView<'_> {
        IterationView {
            outer: self.outer,
            inner,
            rho,
            rounds: self.rounds,
            x: &self.x,
            y: &self.y,
            grads: &self.grads,
        }
    }

    /// Runs inner iterations at penalty `rho` from the current state until
    /// the stopping rule fires or `cap` iterations have run.
    pub fn inner_loop(
        &mut self,
        rho: f64,
        stopping: InnerStopping,
        cap: usize,
        observer: &mut dyn Observer,
    ) -> Result<InnerResult> {
        let (n, m) = (self.x.agents(), self.x.dim());
        let w = &self.network.mixing;
        self.x_bar.as_mut_slice().copy_from_slice(self.x.as_slice());
        observer.inner_start(&self.view(0, rho));

        let mut message = Stacked::zeros(n, m);
        let mut u = vec![0.0; m];
        let mut v = vec![0.0; m];
        let mut residuals = vec![0.0; n];
        let mut thresholds = vec![0.0; n];
        let start_rounds = self.rounds;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < cap {
            // Exchange x̄; each agent forms its disagreement residual and
            // takes a projected dual step.
            message.as_mut_slice().copy_from_slice(self.x_bar.as_slice());
            self.rounds += 1;
            for i in 0..n {
                row_residual_into(&message, w, i, &mut u);
                inject_noise(&mut u, self.comm_sigma, &mut self.rng);
                dual_update(self.y.block_mut(i), &u, self.steps.sigma, rho);
            }
            debug_assert!(self.y.norm_inf() <= rho);

            // Exchange y; every broadcast carries its own perturbation.
            message.as_mut_slice().copy_from_slice(self.y.as_slice());
            for i in 0..n {
                inject_noise(message.block_mut(i), self.comm_sigma, &mut self.rng);
            }
            self.rounds += 1;
            for i in 0..n {
                // Received duals are noisy; an agent knows its own exactly.
                v.iter_mut().for_each(|e| *e = 0.0);
                for &(j, _) in w.neighbor_weights(i) {
                    let wji = w.weight(j, i);
                    for ((e, own), other) in v.iter_mut().zip(self.y.block(i)).zip(message.block(j)) {
                        *e += wji * (own - other);
                    }
                }
                self.x_prev.block_mut(i).copy_from_slice(self.x.block(i));
                primal_update(self.x.block_mut(i), self.grads.block(i), &v, self.steps.alpha, self.problem)
                    .map_err(|_| Error::Divergence { round: self.rounds, what: format!("x of agent {i}") })?;
                self.problem.smooth_gradient_into(i, self.x.block(i), self.grads.block_mut(i));
                let grad = self.grads.block(i);
                residuals[i] = self.problem.local_residual(grad, &v, self.x.block(i));
                thresholds[i] = match stopping {
                    InnerStopping::Strict { eps } => eps,
                    InnerStopping::Hybrid { params, rho_max, .. } => {
                        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                        hybrid_threshold(rho, rho_max, norm, &params)
                    }
                };
                extrapolate_into(self.x.block(i), self.x_prev.block(i), self.x_bar.block_mut(i));
            }
            iterations += 1;
            if !residuals.iter().all(|r| r.is_finite()) {
                return Err(Error::Divergence { round: self.rounds, what: "inner residual".into() });
            }
            observer.iteration(&self.view(iterations, rho));

            converged = match stopping {
                InnerStopping::Strict { .. } => residuals.iter().zip(&thresholds).all(|(r, t)| r <= t),
                InnerStopping::Hybrid { quorum, slack, .. } => {
                    let under = residuals.iter().zip(&thresholds).filter(|(r, t)| r <= t).count();
                    let worst = residuals.iter().zip(&thresholds).map(|(r, t)| r / t).fold(0.0, f64::max);
                    under as f64 >= quorum * n as f64 && worst <= slack
                }
            };
            if converged {
                break;
            }
        }
        Ok(InnerResult {
            iterations,
            communication_rounds: self.rounds - start_rounds,
            residuals,
            thresholds,
            converged,
            reason: if converged { InnerStopReason::QuorumMet } else { InnerStopReason::IterationCap },
        })
    }

    /// One exchange of the fresh primal iterates; returns each agent's
    /// `‖u_i‖₁`.
    fn outer_exchange(&mut self) -> Vec<f64> {
        self.rounds += 1;
        let mut u = vec![0.0; self.x.dim()];
        (0..self.x.agents())
            .map(|i| {
                row_residual_into(&self.x, &self.network.mixing, i, &mut u);
                u.iter().map(|e| e.abs()).sum()
            })
            .collect()
    }
}

/// Standalone inner loop over explicit agent states; writes the final
/// states back.
#[allow(clippy::too_many_arguments)]
pub fn inner_loop(
    states: &mut [AgentState],
    problem: &Problem,
    network: &NetworkModel,
    rho: f64,
    steps: StepSizes,
    stopping: InnerStopping,
    cap: usize,
) -> Result<InnerResult> {
    let xs: Vec<Vec<f64>> = states.iter().map(|s| s.x.clone()).collect();
    let ys: Vec<Vec<f64>> = states.iter().map(|s| s.y.clone()).collect();
    let mut solver = Dp2gSolver::new(problem, network, steps, 0.0, 0)?;
    solver.set_state(Stacked::from_blocks(&xs)?, Stacked::from_blocks(&ys)?)?;
    let result = solver.inner_loop(rho, stopping, cap, &mut ())?;
    for (s, new) in states.iter_mut().zip(solver.agent_states()) {
        *s = new;
    }
    Ok(result)
}

/// Full run from `x = 0`, `y = 0`, recording metrics after every round that
/// changes the primal state.
pub fn run(
    problem: &Problem,
    network: &NetworkModel,
    config: &Dp2gConfig,
    reference: &Reference,
    seed: u64,
) -> Result<RunRecord> {
    run_with_observer(problem, network, config, reference, seed, &mut ())
}

struct Recorder<'r, 'o> {
    record: &'r mut RunRecord,
    problem: &'r Problem,
    network: &'r NetworkModel,
    reference: &'r Reference,
    inner: &'o mut dyn Observer,
}

impl Observer for Recorder<'_, '_> {
    fn inner_start(&mut self, view: &IterationView<'_>) {
        self.inner.inner_start(view);
    }

    fn iteration(&mut self, view: &IterationView<'_>) {
        let sample = metrics_with_gradients(
            view.x,
            Some(view.y),
            view.rho,
            self.problem,
            &self.network.mixing,
            self.reference,
            view.rounds,
            view.grads,
        );
        self.record.push_sample(sample);
        self.inner.iteration(view);
    }
}

pub fn run_with_observer(
    problem: &Problem,
    network: &NetworkModel,
    config: &Dp2gConfig,
    reference: &Reference,
    seed: u64,
    observer: &mut dyn Observer,
) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let steps = config.stepsizes(problem, network)?;
    let schedules = &config.schedules;
    let mut solver = Dp2gSolver::new(problem, network, steps, config.comm_sigma, seed)?;
    let mut record = RunRecord::new(Algorithm::Dp2g, problem.kind(), network.label.clone(), seed);
    let w = &network.mixing;
    record.push_sample(metrics_with_gradients(
        solver.x(),
        Some(solver.y()),
        schedules.rho0,
        problem,
        w,
        reference,
        0,
        solver.gradients(),
    ));

    let consensus_rounds = network.spectral.diameter + config.max_consensus_margin;
    let mut rho = schedules.rho0;
    let mut avg = solver.x().average();
    let mut inner_iterations = 0;
    let mut max_consensus_rounds = 0;
    let mut converged = false;
    let mut capped = false;
    let mut k = 0;
    loop {
        // Each inner iteration costs two rounds and the outer exchange one.
        let budget = config.round_cap.saturating_sub(solver.rounds() + 1) / 2;
        let cap = config.inner_cap.min(budget);
        if cap == 0 {
            capped = true;
            break;
        }
        solver.outer = k;
        record.rho_history.push(rho);
        let stopping = InnerStopping::for_outer(config.stopping, schedules, k);
        let inner = {
            let mut recorder = Recorder { record: &mut record, problem, network, reference, inner: observer };
            solver.inner_loop(rho, stopping, cap, &mut recorder)?
        };
        inner_iterations += inner.iterations;

        let disagreement = solver.outer_exchange();
        let worst = max_consensus(&disagreement, &network.graph, consensus_rounds);
        max_consensus_rounds += consensus_rounds;
        let new_avg = solver.x().average();
        let moved = new_avg.iter().zip(&avg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        avg = new_avg;
        record.push_sample(metrics_with_gradients(
            solver.x(),
            Some(solver.y()),
            rho,
            problem,
            w,
            reference,
            solver.rounds(),
            solver.gradients(),
        ));

        let delta = schedules.delta(k);
        // Every agent holds the same maximum; agent 0 decides.
        if worst[0] <= delta && inner.converged && moved <= schedules.stabilization * delta {
            converged = true;
            break;
        }
        rho = penalty_update(rho, schedules.beta, schedules.rho_max);
        k += 1;
    }

    record.summary.converged = converged;
    record.summary.capped = capped;
    record.summary.total_rounds = solver.rounds();
    record.summary.max_consensus_rounds = max_consensus_rounds;
    record.summary.inner_iterations = inner_iterations;
    record.summary.outer_iterations = record.rho_history.len();
    record.summary.final_rho = rho;
    record.summary.wall_time_secs = started.elapsed().as_secs_f64();
    record.final_states = solver.x().to_blocks();
    record.final_duals = Some(solver.y().to_blocks());
    Ok(record)
}
