use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distances at or below this are dominated by rounding and are dropped.
pub const RATE_FLOOR: f64 = 1e-12;
pub const MIN_RATE_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `log distance` against iteration; `log r` for a geometric
    /// sequence `rᵗ`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// The retained distances are all equal, so no rate is observable.
    pub flat: bool,
}

/// Least-squares fit of `log d_t` against `t`, ignoring `d_t ≤ RATE_FLOOR`.
pub fn linear_rate_fit(distances: &[f64]) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > RATE_FLOOR && d.is_finite())
        .map(|(t, &d)| (t as f64, d.ln()))
        .collect();
    if points.len() < MIN_RATE_POINTS {
        return Err(Error::InsufficientData(format!(
            "rate fit needs {MIN_RATE_POINTS} points above {RATE_FLOOR}, got {}",
            points.len()
        )));
    }
    let first = points[0].1;
    if points.iter().all(|&(_, v)| v == first) {
        return Ok(RateFit { slope: 0.0, intercept: first, r_squared: 1.0, points: points.len(), flat: true });
    }
    let k = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / k;
    let v_mean = points.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut stt, mut stv, mut svv) = (0.0, 0.0, 0.0);
    for &(t, v) in &points {
        stt += (t - t_mean) * (t - t_mean);
        stv += (t - t_mean) * (v - v_mean);
        svv += (v - v_mean) * (v - v_mean);
    }
    let slope = stv / stt;
    let intercept = v_mean - slope * t_mean;
    let residual: f64 = points.iter().map(|&(t, v)| (v - intercept - slope * t).powi(2)).sum();
    let r_squared = if svv > 0.0 { 1.0 - residual / svv } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared, points: points.len(), flat: false })
}
