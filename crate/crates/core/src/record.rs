//! Per-run output shared by every algorithm.

use serde::{Deserialize, Serialize};

use crate::diagnostics::MetricsSample;
use crate::objectives::ProblemKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dp2g,
    DgdFixed,
    DgdDiminishing,
    Extra,
    Nids,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::DgdFixed, Algorithm::DgdDiminishing, Algorithm::Nids, Algorithm::Extra, Algorithm::Dp2g];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Dp2g => "dp2g",
            Algorithm::DgdFixed => "dgd_fixed",
            Algorithm::DgdDiminishing => "dgd_diminishing",
            Algorithm::Extra => "extra",
            Algorithm::Nids => "nids",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Dp2g => "DP2G",
            Algorithm::DgdFixed => "DGD (fixed)",
            Algorithm::DgdDiminishing => "DGD (diminishing)",
            Algorithm::Extra => "EXTRA",
            Algorithm::Nids => "NIDS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Met the algorithm's termination rule before the round cap.
    pub converged: bool,
    /// Stopped because no further iteration fits in the round budget.
    pub capped: bool,
    /// Neighbor exchanges of optimization messages.
    pub total_rounds: usize,
    /// Scalar max-consensus exchanges, reported separately.
    pub max_consensus_rounds: usize,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub final_rho: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub problem: ProblemKind,
    pub topology: String,
    pub seed: u64,
    /// Digest of the configuration that produced the run; filled by the
    /// experiment runner.
    pub fingerprint: String,
    pub samples: Vec<MetricsSample>,
    pub summary: RunSummary,
    /// `x_i` of every agent at exit.
    pub final_states: Vec<Vec<f64>>,
    /// `y_i` of every agent at exit, for primal-dual methods.
    pub final_duals: Option<Vec<Vec<f64>>>,
    /// Penalty used by each outer iteration.
    pub rho_history: Vec<f64>,
}

impl RunRecord {
    pub fn new(algorithm: Algorithm, problem: ProblemKind, topology: impl Into<String>, seed: u64) -> Self {
        Self {
            algorithm,
            problem,
            topology: topology.into(),
            seed,
            fingerprint: String::new(),
            samples: Vec::new(),
            summary: RunSummary {
                converged: false,
                capped: false,
                total_rounds: 0,
                max_consensus_rounds: 0,
                inner_iterations: 0,
                outer_iterations: 0,
                final_rho: 0.0,
                wall_time_secs: 0.0,
            },
            final_states: Vec::new(),
            final_duals: None,
            rho_history: Vec::new(),
        }
    }

    /// Appends a sample; samples at a round already recorded replace the
    /// previous one so rounds stay strictly increasing.
    pub fn push_sample(&mut self, sample: MetricsSample) {
        match self.samples.last_mut() {
            Some(last) if last.round >= sample.round => {
                debug_assert_eq!(last.round, sample.round, "rounds must not go backwards");
                *last = sample;
            }
            _ => self.samples.push(sample),
        }
    }

    pub fn final_sample(&self) -> Option<&MetricsSample> {
        self.samples.last()
    }

    /// Network mean of the final states.
    pub fn final_average(&self) -> Vec<f64> {
        let n = self.final_states.len() as f64;
        let m = self.final_states.first().map_or(0, Vec::len);
        let mut avg = vec![0.0; m];
        for x in &self.final_states {
            avg.iter_mut().zip(x).for_each(|(a, v)| *a += v);
        }
        avg.iter_mut().for_each(|a| *a /= n);
        avg
    }
}
