use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Read access to per-agent blocks of a stacked vector.
///
/// The neighbor-local operators only go through this trait, which lets tests
/// observe exactly which blocks an agent touches.
pub trait BlockSource {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn block(&self, i: usize) -> &[f64];
}

/// `n` blocks of dimension `m`, stored contiguously agent by agent:
/// `col(x_1, ..., x_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stacked {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl Stacked {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, data: vec![0.0; n * m] }
    }

    pub fn from_flat(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::DimensionMismatch { expected: n * m, actual: data.len() });
        }
        Ok(Self { n, m, data })
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let n = blocks.len();
        let m = blocks.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for b in blocks {
            if b.len() != m {
                return Err(Error::DimensionMismatch { expected: m, actual: b.len() });
            }
            data.extend_from_slice(b);
        }
        Ok(Self { n, m, data })
    }

    /// `1 ⊗ v`: every agent holds `v`.
    pub fn consensual(n: usize, v: &[f64]) -> Self {
        let mut data = Vec::with_capacity(n * v.len());
        for _ in 0..n {
            data.extend_from_slice(v);
        }
        Self { n, m: v.len(), data }
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m.max(1)).take(self.n)
    }

    pub fn to_blocks(&self) -> Vec<Vec<f64>> {
        self.blocks().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn dot(&self, other: &Stacked) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn distance(&self, other: &Stacked) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &Stacked) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Network mean `(1/n) Σ x_i`, accumulated as offsets from the first
    /// block so that identical blocks average to themselves exactly.
    pub fn average(&self) -> Vec<f64> {
        if self.n == 0 {
            return vec![0.0; self.m];
        }
        let base = self.block(0);
        let mut shift = vec![0.0; self.m];
        for b in self.blocks().skip(1) {
            for ((s, v), b0) in shift.iter_mut().zip(b).zip(base) {
                *s += v - b0;
            }
        }
        let n = self.n as f64;
        base.iter().zip(&shift).map(|(b0, s)| b0 + s / n).collect()
    }
}

impl BlockSource for Stacked {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.m
    }

    fn block(&self, i: usize) -> &[f64] {
        Stacked::block(self, i)
    }
}

/// Dual blocks confined to the box `‖y‖∞ ≤ radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedDual {
    values: Stacked,
    radius: f64,
}

impl StackedDual {
    pub fn zeros(n: usize, m: usize, radius: f64) -> Self {
        Self { values: Stacked::zeros(n, m), radius }
    }

    /// Fails when any component lies outside `[-radius, radius]`.
    pub fn new(values: Stacked, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("box radius {radius} must be >= 0")));
        }
        let worst = values.norm_inf();
        if worst > radius {
            return Err(Error::InvalidParameter(format!(
                "dual component {worst} outside box of radius {radius}"
            )));
        }
        Ok(Self { values, radius })
    }

    pub fn values(&self) -> &Stacked {
        &self.values
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn into_values(self) -> Stacked {
        self.values
    }
}
