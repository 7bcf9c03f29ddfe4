use serde::{Deserialize, Serialize};

use super::Reference;
use crate::disagreement::{adjoint_residual_into, disagreement_l1};
use crate::network::MixingMatrix;
use crate::objectives::{min_norm_subgradient, Problem};
use crate::stacked::Stacked;

/// One row of the per-round metrics stream. Field order matches the CSV
/// column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub round: usize,
    /// `|f(x_avg) − f*|`.
    pub objective_residual: f64,
    /// `(1/n) Σ_i ‖x_i − x_avg‖`.
    pub consensus_violation: f64,
    /// Minimal-norm subgradient of `f` at `x_avg`.
    pub optimality_residual: f64,
    /// `ρ ‖Zx‖₁`.
    pub penalty: f64,
    pub rho: f64,
    /// `‖∇F(x) + Zᵀy‖`, composite-aware for the elastic net.
    pub stationarity_bound: f64,
}

/// Stacked-norm bound `‖∇F(x) + Zᵀy‖`; for composite objectives each block
/// uses the minimal-norm subgradient of the local nonsmooth term.
pub fn stationarity_bound(x: &Stacked, y: &Stacked, problem: &Problem, w: &MixingMatrix) -> f64 {
    let mut grads = Stacked::zeros(x.agents(), x.dim());
    for i in 0..x.agents() {
        problem.smooth_gradient_into(i, x.block(i), grads.block_mut(i));
    }
    bound_from_gradients(x, Some(y), problem, w, &grads)
}

fn bound_from_gradients(
    x: &Stacked,
    y: Option<&Stacked>,
    problem: &Problem,
    w: &MixingMatrix,
    grads: &Stacked,
) -> f64 {
    let mut v = vec![0.0; x.dim()];
    let mut total = 0.0;
    for i in 0..x.agents() {
        match y {
            Some(y) => adjoint_residual_into(y, w, i, &mut v),
            None => v.iter_mut().for_each(|e| *e = 0.0),
        }
        let r = problem.local_residual(grads.block(i), &v, x.block(i));
        total += r * r;
    }
    total.sqrt()
}

/// Evaluates every metric at `(x, y)`. Methods without a dual pass `None`,
/// which is treated as `y = 0`.
pub fn compute_metrics(
    x: &Stacked,
    y: Option<&Stacked>,
    rho: f64,
    problem: &Problem,
    w: &MixingMatrix,
    reference: &Reference,
    round: usize,
) -> MetricsSample {
    let mut grads = Stacked::zeros(x.agents(), x.dim());
    for i in 0..x.agents() {
        problem.smooth_gradient_into(i, x.block(i), grads.block_mut(i));
    }
    metrics_with_gradients(x, y, rho, problem, w, reference, round, &grads)
}

/// Same as [`compute_metrics`] with the local gradients `∇f_i(x_i)` supplied
/// by a solver that already has them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn metrics_with_gradients(
    x: &Stacked,
    y: Option<&Stacked>,
    rho: f64,
    problem: &Problem,
    w: &MixingMatrix,
    reference: &Reference,
    round: usize,
    grads: &Stacked,
) -> MetricsSample {
    let avg = x.average();
    let consensus_violation = x
        .blocks()
        .map(|b| b.iter().zip(&avg).map(|(v, a)| (v - a) * (v - a)).sum::<f64>().sqrt())
        .sum::<f64>()
        / x.agents() as f64;
    let total_l1 = problem.l1_weight() * problem.agents() as f64;
    let optimality_residual = min_norm_subgradient(problem.total_smooth_gradient(&avg).into_iter(), &avg, total_l1);
    MetricsSample {
        round,
        objective_residual: (problem.objective_value(&avg) - reference.f_star).abs(),
        consensus_violation,
        optimality_residual,
        penalty: rho * disagreement_l1(x, w),
        rho,
        stationarity_bound: bound_from_gradients(x, y, problem, w, grads),
    }
}
