use serde::{Deserialize, Serialize};

use crate::disagreement::{apply, apply_adjoint};
use crate::network::MixingMatrix;
use crate::objectives::{min_norm_subgradient, Problem};
use crate::stacked::Stacked;
use crate::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Weights of the squared-difference terms for stepsize `alpha`, smoothness
/// `l_max` and tuning `delta ∈ (0, 1/5]`.
pub fn lyapunov_constants(alpha: f64, l_max: f64, delta: f64) -> Result<LyapunovConstants> {
    if !(delta > 0.0 && delta <= 0.2) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1/5], got {delta}")));
    }
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::Degenerate(format!("L_max must be positive, got {l_max}")));
    }
    if !(alpha > 0.0 && alpha < 1.0 / (3.0 * l_max)) {
        return Err(Error::StepsizeTooLarge(format!(
            "alpha = {alpha} violates 0 < alpha < 1/(3 L_max) = {}",
            1.0 / (3.0 * l_max)
        )));
    }
    let a = delta / alpha;
    let b = 1.0 / (2.0 * alpha) - delta / alpha - l_max / 4.0 - delta * l_max - alpha * delta * l_max * l_max / 2.0
        + alpha * l_max * l_max / (4.0 * delta);
    let c = b - alpha * l_max * l_max / (2.0 * delta);
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::StepsizeTooLarge(format!("Lyapunov weights not positive: a={a}, b={b}, c={c}")));
    }
    Ok(LyapunovConstants { delta, a, b, c })
}

/// `F(x) + ⟨Zx, y⟩ − a‖x − p‖² + b‖x − q‖²`, or `-∞` when `y` leaves the
/// box of radius `rho`.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_value(
    x: &Stacked,
    y: &Stacked,
    p: &Stacked,
    q: &Stacked,
    rho: f64,
    problem: &Problem,
    w: &MixingMatrix,
    constants: &LyapunovConstants,
) -> f64 {
    if y.norm_inf() > rho * (1.0 + 1e-12) {
        return f64::NEG_INFINITY;
    }
    let f: f64 = (0..x.agents()).map(|i| problem.local_value(i, x.block(i))).sum();
    f + apply(x, w).dot(y) - constants.a * x.distance_sq(p) + constants.b * x.distance_sq(q)
}

/// Primal-dual iterates of one inner loop at a fixed penalty: `xs[t]`,
/// `ys[t]` for `t = 0..=T`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerTrace {
    pub rho: f64,
    pub xs: Vec<Stacked>,
    pub ys: Vec<Stacked>,
}

impl InnerTrace {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn prev(&self, t: usize) -> &Stacked {
        &self.xs[t.saturating_sub(1)]
    }
}

fn psi(trace: &InnerTrace, t: usize, problem: &Problem, w: &MixingMatrix, k: &LyapunovConstants) -> f64 {
    lyapunov_value(&trace.xs[t], &trace.ys[t], &trace.xs[t + 1], trace.prev(t), trace.rho, problem, w, k)
}

/// Per-step margins `Ψ(zᵗ) − Ψ(zᵗ⁺¹) − c(‖xᵗ⁺¹ − xᵗ‖² + ‖xᵗ − xᵗ⁻¹‖²)` with
/// `zᵗ = (xᵗ, yᵗ, xᵗ⁺¹, xᵗ⁻¹)` and `x⁻¹ = x⁰`. Nonnegative margins certify
/// descent.
pub fn lyapunov_descent_check(
    trace: &InnerTrace,
    problem: &Problem,
    w: &MixingMatrix,
    constants: &LyapunovConstants,
) -> Vec<f64> {
    if trace.len() < 3 {
        return Vec::new();
    }
    let values: Vec<f64> = (0..trace.len() - 1).map(|t| psi(trace, t, problem, w, constants)).collect();
    (0..trace.len() - 2)
        .map(|t| {
            let moves = trace.xs[t + 1].distance_sq(&trace.xs[t]) + trace.xs[t].distance_sq(trace.prev(t));
            values[t] - values[t + 1] - constants.c * moves
        })
        .collect()
}

/// Ratios `‖dᵗ‖ / (‖xᵗ − xᵗ⁻¹‖ + ‖xᵗ⁺¹ − xᵗ‖)` where `dᵗ` is the minimal-norm
/// subgradient of `Ψ` at `zᵗ`. Bounded ratios along a trace are the
/// observable form of the subgradient bound. A zero denominator yields `0`
/// when `dᵗ = 0` and `+∞` otherwise.
pub fn subgradient_ratios(
    trace: &InnerTrace,
    problem: &Problem,
    w: &MixingMatrix,
    constants: &LyapunovConstants,
) -> Vec<f64> {
    if trace.len() < 2 {
        return Vec::new();
    }
    let l1 = problem.l1_weight();
    let rho = trace.rho;
    (0..trace.len() - 1)
        .map(|t| {
            let (x, y, p, q) = (&trace.xs[t], &trace.ys[t], &trace.xs[t + 1], trace.prev(t));
            let zty = apply_adjoint(y, w);
            let zx = apply(x, w);
            let mut sq = 0.0;
            for i in 0..x.agents() {
                let mut g = vec![0.0; x.dim()];
                problem.smooth_gradient_into(i, x.block(i), &mut g);
                let xi = x.block(i);
                let smooth = g.iter().enumerate().map(|(j, gj)| {
                    gj + zty.block(i)[j] - 2.0 * constants.a * (xi[j] - p.block(i)[j])
                        + 2.0 * constants.b * (xi[j] - q.block(i)[j])
                });
                let r = min_norm_subgradient(smooth, xi, l1);
                sq += r * r;
            }
            // Dual block: Zx minus the normal cone of the box at y.
            for (&u, &yj) in zx.as_slice().iter().zip(y.as_slice()) {
                let e = if yj >= rho { u.min(0.0) } else if yj <= -rho { u.max(0.0) } else { u };
                sq += e * e;
            }
            sq += 4.0 * constants.a * constants.a * p.distance_sq(x) + 4.0 * constants.b * constants.b * q.distance_sq(x);
            let numerator = sq.sqrt();
            let denominator = x.distance(q) + p.distance(x);
            if denominator > 0.0 {
                numerator / denominator
            } else if numerator == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect()
}
