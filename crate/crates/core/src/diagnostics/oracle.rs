use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::objectives::{min_norm_subgradient, soft_threshold, symmetric_max_eigenvalue, Problem, ProblemKind};
use crate::{Error, Result};

/// Required minimal-norm subgradient of `f` at the reference point.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Centralized minimizer of `f = Σ_i f_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// Minimal-norm subgradient of `f` at `x_star`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the centralized problem to [`ORACLE_TOLERANCE`].
///
/// Ridge uses a Cholesky solve of the normal equations, logistic a damped
/// Newton method, and the elastic net proximal gradient with backtracking.
pub fn centralized_oracle(problem: &Problem) -> Result<Reference> {
    let (x, iterations) = match problem.kind() {
        ProblemKind::Ridge => (quadratic_minimizer(problem)?, 1),
        ProblemKind::Logistic => newton(problem)?,
        ProblemKind::ElasticNet => proximal_gradient(problem)?,
    };
    let residual = total_residual(problem, &x);
    if !(residual <= ORACLE_TOLERANCE) {
        return Err(Error::OracleNonConvergence { residual, iterations });
    }
    Ok(Reference { f_star: problem.objective_value(&x), x_star: x, residual, iterations })
}

fn total_residual(problem: &Problem, x: &[f64]) -> f64 {
    let l1 = problem.l1_weight() * problem.agents() as f64;
    min_norm_subgradient(problem.total_smooth_gradient(x).into_iter(), x, l1)
}

fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Degenerate("centralized Hessian is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

fn quadratic_minimizer(problem: &Problem) -> Result<Vec<f64>> {
    let m = problem.dim();
    let h = problem.total_smooth_hessian(&vec![0.0; m]);
    let mut x = DVector::zeros(m);
    // One refinement pass recovers the digits lost to the Cholesky solve.
    for _ in 0..2 {
        let g = DVector::from_vec(problem.total_smooth_gradient(x.as_slice()));
        x -= solve_spd(h.clone(), &g)?;
    }
    Ok(x.data.into())
}

fn newton(problem: &Problem) -> Result<(Vec<f64>, usize)> {
    let m = problem.dim();
    let mut x = vec![0.0; m];
    let mut value = problem.objective_value(&x);
    for iter in 0..200 {
        let g = DVector::from_vec(problem.total_smooth_gradient(&x));
        if g.norm() <= 0.1 * ORACLE_TOLERANCE {
            return Ok((x, iter));
        }
        let mut h = problem.total_smooth_hessian(&x);
        // Tiny damping keeps separable data from producing a singular system.
        let damping = 1e-12 * h.diagonal().amax().max(1.0);
        for j in 0..m {
            h[(j, j)] += damping;
        }
        let step = solve_spd(h, &g)?;
        let decrement = g.dot(&step);
        let mut t = 1.0;
        // Once the Newton decrement is at rounding level the Armijo test is
        // meaningless, so the full step is taken.
        let tiny = decrement <= 1e-14 * value.abs().max(1.0);
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - t * si).collect();
            let trial_value = problem.objective_value(&trial);
            if tiny || trial_value <= value - 0.25 * t * decrement || t < 1e-12 {
                x = trial;
                value = trial_value;
                break;
            }
            t *= 0.5;
        }
    }
    let residual = total_residual(problem, &x);
    if residual <= ORACLE_TOLERANCE {
        Ok((x, 200))
    } else {
        Err(Error::OracleNonConvergence { residual, iterations: 200 })
    }
}

fn proximal_gradient(problem: &Problem) -> Result<(Vec<f64>, usize)> {
    const MAX_ITERATIONS: usize = 100_000;
    let m = problem.dim();
    let n = problem.agents() as f64;
    let l1 = problem.l1_weight() * n;
    let smooth = |x: &[f64]| (0..problem.agents()).map(|i| problem.smooth_value(i, x)).sum::<f64>();
    let curvature = symmetric_max_eigenvalue(&problem.total_smooth_hessian(&vec![0.0; m]));
    let mut step = if curvature > 0.0 { 1.0 / curvature } else { 1.0 };
    let mut x = vec![0.0; m];
    for iter in 0..MAX_ITERATIONS {
        if total_residual(problem, &x) <= 0.1 * ORACLE_TOLERANCE {
            return Ok((x, iter));
        }
        let g = problem.total_smooth_gradient(&x);
        let fx = smooth(&x);
        let prox_step = |step: f64| -> Vec<f64> {
            x.iter().zip(&g).map(|(xi, gi)| soft_threshold(xi - step * gi, step * l1)).collect()
        };
        let trial = loop {
            let trial = prox_step(step);
            let diff: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let model = fx
                + g.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>()
                + diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            if smooth(&trial) <= model + 1e-12 * fx.abs().max(1.0) || step < 1e-14 {
                break trial;
            }
            step *= 0.5;
        };
        if trial == x {
            // Fixed point to machine precision; the caller checks the residual.
            return Ok((x, iter));
        }
        x = trial;
    }
    Ok((x, MAX_ITERATIONS))
}
