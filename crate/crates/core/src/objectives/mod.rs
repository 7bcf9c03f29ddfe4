//! Benchmark objectives with per-agent data shards.
//!
//! Each agent `i` holds `f_i(x) = scale · (loss_i(x) + reg(x))`. The common
//! factor `scale` is chosen by [`Problem::scale_to_unit_lipschitz`] so that
//! `max_i L_i ≤ 1`; it multiplies every term, so minimizers do not move.

mod generate;
mod io;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

pub use generate::{generate_dataset, DataSpec, GroundTruth};
pub use io::{export_dataset, import_dataset, DatasetManifest};

use crate::{Error, Result};

/// Above this dimension Lipschitz constants come from power iteration.
const DENSE_SVD_MAX_DIM: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Ridge,
    Logistic,
    ElasticNet,
}

impl ProblemKind {
    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Ridge => "ridge",
            ProblemKind::Logistic => "logistic",
            ProblemKind::ElasticNet => "elastic_net",
        }
    }
}

/// Loss family and its regularization weights (before scaling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `1/(2d) ‖Ax − b‖² + λ/2 ‖x‖²`
    Ridge { lambda: f64 },
    /// `1/d Σ log(1 + exp(−b_j a_jᵀx))`
    Logistic,
    /// `1/(2d) ‖Ax − b‖² + λ₁‖x‖₁ + λ₂/2 ‖x‖²`
    ElasticNet { l1: f64, l2: f64 },
}

impl Objective {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Objective::Ridge { .. } => ProblemKind::Ridge,
            Objective::Logistic => ProblemKind::Logistic,
            Objective::ElasticNet { .. } => ProblemKind::ElasticNet,
        }
    }

    fn l2(&self) -> f64 {
        match *self {
            Objective::Ridge { lambda } => lambda,
            Objective::Logistic => 0.0,
            Objective::ElasticNet { l2, .. } => l2,
        }
    }

    fn l1(&self) -> f64 {
        match *self {
            Objective::ElasticNet { l1, .. } => l1,
            _ => 0.0,
        }
    }
}

/// One agent's samples. Least-squares shards also cache `AᵀA/d`, `Aᵀb/d`
/// and `‖b‖²/(2d)` so the gradient costs `O(m²)` instead of `O(dm)`.
#[derive(Debug, Clone)]
pub struct Shard {
    a: DMatrix<f64>,
    b: DVector<f64>,
    quadratic: Option<Quadratic>,
}

#[derive(Debug, Clone)]
struct Quadratic {
    gram: DMatrix<f64>,
    atb: DVector<f64>,
    half_bb: f64,
}

impl Shard {
    pub fn features(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn samples(&self) -> usize {
        self.a.nrows()
    }
}

/// A consensus problem `min Σ_i f_i(x)` split across agents.
#[derive(Debug, Clone)]
pub struct Problem {
    objective: Objective,
    m: usize,
    shards: Vec<Shard>,
    scale: f64,
    /// Unscaled per-agent Lipschitz constants and strong convexity moduli.
    raw_lipschitz: Vec<f64>,
    raw_strong_convexity: Vec<f64>,
}

impl Problem {
    /// Builds a problem from raw `(A_i, b_i)` shards with unit scale.
    pub fn new(objective: Objective, shards: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Self> {
        let m = shards.first().map(|(a, _)| a.ncols()).ok_or_else(|| {
            Error::InvalidParameter("problem needs at least one agent".into())
        })?;
        if let Objective::ElasticNet { l1, l2 } = objective {
            if !(l1 > 0.0 && l2 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "elastic net needs l1 > 0 and l2 > 0, got ({l1}, {l2})"
                )));
            }
        }
        let mut built = Vec::with_capacity(shards.len());
        let mut raw_lipschitz = Vec::with_capacity(shards.len());
        let mut raw_strong_convexity = Vec::with_capacity(shards.len());
        for (a, b) in shards {
            if a.ncols() != m {
                return Err(Error::DimensionMismatch { expected: m, actual: a.ncols() });
            }
            if a.nrows() != b.len() || a.nrows() == 0 {
                return Err(Error::DimensionMismatch { expected: a.nrows(), actual: b.len() });
            }
            if objective.kind() == ProblemKind::Logistic && b.iter().any(|&l| l != 1.0 && l != -1.0) {
                return Err(Error::InvalidParameter("logistic labels must be ±1".into()));
            }
            let d = a.nrows() as f64;
            let (s_max, s_min) = singular_extremes(&a);
            let (lip, mu) = match objective {
                Objective::Logistic => (s_max * s_max / (4.0 * d), 0.0),
                _ => (s_max * s_max / d + objective.l2(), s_min * s_min / d + objective.l2()),
            };
            raw_lipschitz.push(lip);
            raw_strong_convexity.push(mu);
            let quadratic = match objective {
                Objective::Logistic => None,
                _ => Some(Quadratic {
                    gram: a.tr_mul(&a) / d,
                    atb: a.tr_mul(&b) / d,
                    half_bb: b.norm_squared() / (2.0 * d),
                }),
            };
            built.push(Shard { a, b, quadratic });
        }
        Ok(Self { objective, m, shards: built, scale: 1.0, raw_lipschitz, raw_strong_convexity })
    }

    /// Rescales every `f_i` by a common factor so that `L_max ≤ 1`.
    /// Problems already satisfying the bound are returned unchanged.
    pub fn scale_to_unit_lipschitz(mut self) -> Self {
        let raw_max = self.raw_lipschitz.iter().copied().fold(0.0, f64::max);
        self.scale = if raw_max > 1.0 { 1.0 / raw_max } else { 1.0 };
        self
    }

    /// Overrides the common factor; used when reloading exported datasets.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn kind(&self) -> ProblemKind {
        self.objective.kind()
    }

    pub fn agents(&self) -> usize {
        self.shards.len()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn shard(&self, i: usize) -> &Shard {
        &self.shards[i]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Per-agent `L_i` and `L_max` of the scaled smooth parts.
    pub fn lipschitz_constants(&self) -> (Vec<f64>, f64) {
        let per: Vec<f64> = self.raw_lipschitz.iter().map(|l| l * self.scale).collect();
        let max = per.iter().copied().fold(0.0, f64::max);
        (per, max)
    }

    pub fn lipschitz_max(&self) -> f64 {
        self.lipschitz_constants().1
    }

    /// Per-agent strong convexity moduli `μ_i` (zero for logistic).
    pub fn strong_convexity(&self) -> Vec<f64> {
        self.raw_strong_convexity.iter().map(|m| m * self.scale).collect()
    }

    /// Effective weight of `‖x‖₁` in each `f_i` after scaling.
    pub fn l1_weight(&self) -> f64 {
        self.scale * self.objective.l1()
    }

    /// Effective ridge weight in each `f_i` after scaling.
    pub fn l2_weight(&self) -> f64 {
        self.scale * self.objective.l2()
    }

    /// Gradient of the smooth part of `f_i`.
    pub fn smooth_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, actual: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gradient input"));
        }
        let mut out = vec![0.0; self.m];
        self.smooth_gradient_into(i, x, &mut out);
        Ok(out)
    }

    /// Unchecked hot-path variant of [`Problem::smooth_gradient`].
    pub fn smooth_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let shard = &self.shards[i];
        let xv = DVector::from_column_slice(x);
        match (&self.objective, &shard.quadratic) {
            (Objective::Logistic, _) => {
                let d = shard.samples() as f64;
                let margins = &shard.a * &xv;
                // d/dz log(1 + exp(-b z)) = -b · sigmoid(-b z)
                let weights = DVector::from_iterator(
                    margins.len(),
                    margins.iter().zip(shard.b.iter()).map(|(&z, &b)| -b * sigmoid(-b * z) / d),
                );
                let g = shard.a.tr_mul(&weights);
                for (o, gj) in out.iter_mut().zip(g.iter()) {
                    *o = self.scale * gj;
                }
            }
            (_, Some(q)) => {
                let g = &q.gram * &xv - &q.atb;
                let l2 = self.objective.l2();
                for ((o, gj), xj) in out.iter_mut().zip(g.iter()).zip(x) {
                    *o = self.scale * (gj + l2 * xj);
                }
            }
            (_, None) => unreachable!("least-squares shards always cache their normal equations"),
        }
    }

    /// Gradient of the smooth part of `Σ_i f_i` at a common point.
    pub fn total_smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut total = vec![0.0; self.m];
        let mut g = vec![0.0; self.m];
        for i in 0..self.agents() {
            self.smooth_gradient_into(i, x, &mut g);
            total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
        }
        total
    }

    /// Smooth part of `f_i(x)`.
    pub fn smooth_value(&self, i: usize, x: &[f64]) -> f64 {
        let shard = &self.shards[i];
        let xv = DVector::from_column_slice(x);
        let loss = match (&self.objective, &shard.quadratic) {
            (Objective::Logistic, _) => {
                let d = shard.samples() as f64;
                let margins = &shard.a * &xv;
                margins.iter().zip(shard.b.iter()).map(|(&z, &b)| log1p_exp(-b * z)).sum::<f64>() / d
            }
            (_, Some(q)) => 0.5 * xv.dot(&(&q.gram * &xv)) - xv.dot(&q.atb) + q.half_bb,
            (_, None) => unreachable!(),
        };
        let sq: f64 = x.iter().map(|v| v * v).sum();
        self.scale * (loss + 0.5 * self.objective.l2() * sq)
    }

    /// `f_i(x)` including the local nonsmooth term.
    pub fn local_value(&self, i: usize, x: &[f64]) -> f64 {
        self.smooth_value(i, x) + self.l1_weight() * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Global `f(x) = Σ_i f_i(x)` at a common point.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        (0..self.agents()).map(|i| self.local_value(i, x)).sum()
    }

    /// Proximal map of `step · (local nonsmooth term)`, in place.
    /// Identity except for the elastic net, where it soft-thresholds.
    pub fn local_prox_in_place(&self, step: f64, x: &mut [f64]) {
        let threshold = step * self.l1_weight();
        if threshold > 0.0 {
            x.iter_mut().for_each(|v| *v = soft_threshold(*v, threshold));
        }
    }

    pub fn local_prox(&self, step: f64, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.local_prox_in_place(step, &mut out);
        out
    }

    /// Hessian of the smooth part of `Σ_i f_i` at a common point.
    pub(crate) fn total_smooth_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.m, self.m);
        let xv = DVector::from_column_slice(x);
        for shard in &self.shards {
            match &shard.quadratic {
                Some(q) => h += &q.gram,
                None => {
                    let d = shard.samples() as f64;
                    let margins = &shard.a * &xv;
                    let mut weighted = shard.a.clone();
                    for (r, &z) in margins.iter().enumerate() {
                        let s = sigmoid(z);
                        weighted.row_mut(r).scale_mut(s * (1.0 - s) / d);
                    }
                    h += shard.a.tr_mul(&weighted);
                }
            }
        }
        for j in 0..self.m {
            h[(j, j)] += self.agents() as f64 * self.objective.l2();
        }
        h * self.scale
    }

    /// Norm of the minimal-norm element of `∂(f_i + ⟨v, ·⟩)(x)`. For smooth
    /// objectives this is `‖∇f_i(x) + v‖`.
    pub fn local_residual(&self, grad: &[f64], v: &[f64], x: &[f64]) -> f64 {
        min_norm_subgradient(grad.iter().zip(v).map(|(g, v)| g + v), x, self.l1_weight())
    }
}

/// `‖dist(0, g + w∂‖·‖₁(x))‖` evaluated componentwise.
pub fn min_norm_subgradient(g: impl Iterator<Item = f64>, x: &[f64], l1: f64) -> f64 {
    if l1 == 0.0 {
        return g.map(|v| v * v).sum::<f64>().sqrt();
    }
    g.zip(x)
        .map(|(gj, &xj)| {
            let r = if xj > 0.0 {
                gj + l1
            } else if xj < 0.0 {
                gj - l1
            } else {
                (gj.abs() - l1).max(0.0)
            };
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// `sign(v) · max(|v| − t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Largest and smallest singular values of `a`.
fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    if a.ncols() <= DENSE_SVD_MAX_DIM {
        let s = SVD::new(a.clone(), false, false).singular_values;
        let max = s.iter().copied().fold(0.0, f64::max);
        // Fewer samples than columns leaves a nontrivial null space.
        let min = if a.nrows() < a.ncols() { 0.0 } else { s.iter().copied().fold(f64::INFINITY, f64::min) };
        (max, min)
    } else {
        (power_iteration_norm(a), 0.0)
    }
}

/// `σ_max(A)` by power iteration on `AᵀA`, to 1e-8 relative change.
fn power_iteration_norm(a: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_element(a.ncols(), 1.0 / (a.ncols() as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = a.tr_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let converged = (norm - estimate).abs() <= 1e-8 * norm;
        estimate = norm;
        if converged {
            break;
        }
    }
    estimate.sqrt()
}

/// Largest eigenvalue of a symmetric matrix; used by the reference solver.
pub(crate) fn symmetric_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
