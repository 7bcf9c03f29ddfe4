use serde::{Deserialize, Serialize};

use crate::network::SpectralReport;
use crate::objectives::Problem;
use crate::{Error, Result};

/// Local variables of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub x_prev: Vec<f64>,
}

impl AgentState {
    pub fn zeros(m: usize) -> Self {
        Self { x: vec![0.0; m], y: vec![0.0; m], x_bar: vec![0.0; m], x_prev: vec![0.0; m] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub sigma: f64,
}

impl StepSizes {
    /// Checks `0 < α < 1/(3 L_max)` and `0 < σ < 1/(α κ_Z²)`.
    pub fn validate(&self, l_max: f64, kappa_z: f64) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0 / (3.0 * l_max)) {
            return Err(Error::StepsizeTooLarge(format!(
                "alpha = {} must lie in (0, 1/(3 L_max)) = (0, {})",
                self.alpha,
                1.0 / (3.0 * l_max)
            )));
        }
        let sigma_max = 1.0 / (self.alpha * kappa_z * kappa_z);
        if !(self.sigma > 0.0 && self.sigma < sigma_max) {
            return Err(Error::StepsizeTooLarge(format!(
                "sigma = {} must lie in (0, 1/(alpha kappa_Z^2)) = (0, {sigma_max})",
                self.sigma
            )));
        }
        Ok(())
    }
}

pub const DEFAULT_ALPHA_FACTOR: f64 = 0.3;
pub const DEFAULT_SIGMA_FRACTION: f64 = 0.9;
pub const ELASTIC_NET_SIGMA_FRACTION: f64 = 0.8;

/// `α = 0.3 / L_max`, `σ = fraction / (α κ_Z²)`. A single agent has
/// `κ_Z = 0` and no dual coupling; σ then falls back to `fraction / α`.
pub fn default_stepsizes(l_max: f64, spectral: &SpectralReport, sigma_fraction: f64) -> Result<StepSizes> {
    stepsizes_with_factor(l_max, spectral, DEFAULT_ALPHA_FACTOR, sigma_fraction)
}

pub(crate) fn stepsizes_with_factor(
    l_max: f64,
    spectral: &SpectralReport,
    alpha_factor: f64,
    sigma_fraction: f64,
) -> Result<StepSizes> {
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::Degenerate(format!("L_max must be positive and finite, got {l_max}")));
    }
    if !(sigma_fraction > 0.0 && sigma_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("sigma fraction must lie in (0, 1), got {sigma_fraction}")));
    }
    let alpha = alpha_factor / l_max;
    let kappa_sq = spectral.kappa_z * spectral.kappa_z;
    let sigma = if kappa_sq > 0.0 { sigma_fraction / (alpha * kappa_sq) } else { sigma_fraction / alpha };
    Ok(StepSizes { alpha, sigma })
}

/// Projected dual ascent `y ← clip(y + σ ū, ±ρ)`.
pub fn dual_step(state: &mut AgentState, u_bar: &[f64], sigma: f64, rho: f64) {
    dual_update(&mut state.y, u_bar, sigma, rho);
}

pub(crate) fn dual_update(y: &mut [f64], u_bar: &[f64], sigma: f64, rho: f64) {
    for (yj, uj) in y.iter_mut().zip(u_bar) {
        *yj = (*yj + sigma * uj).clamp(-rho, rho);
    }
}

/// Proximal gradient step `x ← prox(x − α(∇f_i + v))`; the previous `x` is
/// kept in `x_prev`.
pub fn primal_step(state: &mut AgentState, grad: &[f64], v: &[f64], alpha: f64, problem: &Problem) -> Result<()> {
    state.x_prev.copy_from_slice(&state.x);
    primal_update(&mut state.x, grad, v, alpha, problem)
}

pub(crate) fn primal_update(x: &mut [f64], grad: &[f64], v: &[f64], alpha: f64, problem: &Problem) -> Result<()> {
    for ((xj, gj), vj) in x.iter_mut().zip(grad).zip(v) {
        *xj -= alpha * (gj + vj);
    }
    problem.local_prox_in_place(alpha, x);
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("primal iterate"))
    }
}

/// Over-relaxation `x̄ = 2x − x_prev`.
pub fn extrapolate(state: &mut AgentState) {
    extrapolate_into(&state.x, &state.x_prev, &mut state.x_bar);
}

pub(crate) fn extrapolate_into(x: &[f64], x_prev: &[f64], x_bar: &mut [f64]) {
    for ((b, xj), pj) in x_bar.iter_mut().zip(x).zip(x_prev) {
        *b = 2.0 * xj - pj;
    }
}

/// Parameters of the adaptive inner threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridParams {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub beta_pen: f64,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self { eps_abs: 1e-4, eps_rel: 0.02, beta_pen: 2.0 }
    }
}

/// `τ = max(ε_abs, ε_rel ‖∇f_i‖) · (1 + β_pen (1 − ρ/ρ_max)²)`: looser while
/// the penalty is still small.
pub fn hybrid_threshold(rho: f64, rho_max: f64, grad_norm: f64, params: &HybridParams) -> f64 {
    let gap = 1.0 - (rho / rho_max).clamp(0.0, 1.0);
    params.eps_abs.max(params.eps_rel * grad_norm) * (1.0 + params.beta_pen * gap * gap)
}

/// `min(β ρ, ρ_max)`.
pub fn penalty_update(rho: f64, beta: f64, rho_max: f64) -> f64 {
    (beta * rho).min(rho_max)
}

/// Number of updates after which [`penalty_update`] sits at the cap,
/// `⌈log(ρ_max/ρ₀)/log β⌉`.
pub fn updates_to_cap(rho0: f64, beta: f64, rho_max: f64) -> usize {
    if rho0 >= rho_max {
        return 0;
    }
    ((rho_max / rho0).ln() / beta.ln()).ceil() as usize
}
