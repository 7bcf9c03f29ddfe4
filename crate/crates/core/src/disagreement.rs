//! The consensus operator `Z = (I − W) ⊗ I_m`, applied neighbor by neighbor.
//!
//! `Z` is never formed. Every routine reads only the blocks of agent `i` and
//! its graph neighbors through [`BlockSource`].

use crate::network::MixingMatrix;
use crate::{BlockSource, Stacked};

/// `u_i = (1 − w_ii) x_i − Σ_{j ∈ N_i} w_ij x_j`.
pub fn row_residual<S: BlockSource + ?Sized>(x: &S, w: &MixingMatrix, i: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.dim()];
    row_residual_into(x, w, i, &mut out);
    out
}

pub fn row_residual_into<S: BlockSource + ?Sized>(x: &S, w: &MixingMatrix, i: usize, out: &mut [f64]) {
    // Rows of W sum to one, so this equals Σ_j w_ij (x_i − x_j), which is
    // exactly zero on consensual inputs.
    let xi = x.block(i);
    out.iter_mut().for_each(|o| *o = 0.0);
    for &(j, wij) in w.neighbor_weights(i) {
        for ((o, a), b) in out.iter_mut().zip(xi).zip(x.block(j)) {
            *o += wij * (a - b);
        }
    }
}

/// `v_i = (1 − w_ii) y_i − Σ_{j ∈ N_i} w_ji y_j`, the `i`-th block of `Zᵀy`.
pub fn adjoint_residual<S: BlockSource + ?Sized>(y: &S, w: &MixingMatrix, i: usize) -> Vec<f64> {
    let mut out = vec![0.0; y.dim()];
    adjoint_residual_into(y, w, i, &mut out);
    out
}

pub fn adjoint_residual_into<S: BlockSource + ?Sized>(y: &S, w: &MixingMatrix, i: usize, out: &mut [f64]) {
    let yi = y.block(i);
    out.iter_mut().for_each(|o| *o = 0.0);
    for &(j, _) in w.neighbor_weights(i) {
        let wji = w.weight(j, i);
        for ((o, a), b) in out.iter_mut().zip(yi).zip(y.block(j)) {
            *o += wji * (a - b);
        }
    }
}

/// `Zx` for all agents.
pub fn apply<S: BlockSource + ?Sized>(x: &S, w: &MixingMatrix) -> Stacked {
    let (n, m) = (x.agents(), x.dim());
    let mut out = Stacked::zeros(n, m);
    for i in 0..n {
        row_residual_into(x, w, i, out.block_mut(i));
    }
    out
}

/// `Zᵀy` for all agents.
pub fn apply_adjoint<S: BlockSource + ?Sized>(y: &S, w: &MixingMatrix) -> Stacked {
    let (n, m) = (y.agents(), y.dim());
    let mut out = Stacked::zeros(n, m);
    for i in 0..n {
        adjoint_residual_into(y, w, i, out.block_mut(i));
    }
    out
}

/// `‖Zx‖₁ = Σ_i ‖u_i‖₁`.
pub fn disagreement_l1<S: BlockSource + ?Sized>(x: &S, w: &MixingMatrix) -> f64 {
    let mut u = vec![0.0; x.dim()];
    (0..x.agents())
        .map(|i| {
            row_residual_into(x, w, i, &mut u);
            u.iter().map(|v| v.abs()).sum::<f64>()
        })
        .sum()
}

/// `ρ ‖Zx‖₁`.
pub fn penalty_value<S: BlockSource + ?Sized>(x: &S, w: &MixingMatrix, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    rho * disagreement_l1(x, w)
}

/// A subgradient of `‖Zx‖₁`: blockwise
/// `(1 − w_ii) sign(u_i) − Σ_{r: i ∈ N_r} w_ri sign(u_r)`, with `sign(0) = 0`.
pub fn penalty_subgradient<S: BlockSource + ?Sized>(x: &S, w: &MixingMatrix) -> Stacked {
    let mut signs = apply(x, w);
    signs.as_mut_slice().iter_mut().for_each(|v| *v = sign(*v));
    apply_adjoint(&signs, w)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
