//! Runs every (seed, topology, algorithm) combination of a config.

use anyhow::{anyhow, Context, Result};
use consensus_core::baselines::{run_baseline, BaselineConfig, BaselineKind, Targets};
use consensus_core::diagnostics::{centralized_oracle, Reference};
use consensus_core::dp2g;
use consensus_core::network::NetworkModel;
use consensus_core::objectives::{generate_dataset, GroundTruth, ProblemKind};
use consensus_core::record::{Algorithm, RunRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::{support_recovery_report, SupportReport, SUPPORT_THRESHOLD};

/// Data drawn for one seed, shared by every topology and algorithm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedData {
    pub seed: u64,
    pub truth: GroundTruth,
    pub reference: Reference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub fingerprint: String,
    /// Ordered by seed, then topology, then the configured algorithm order
    /// with DP2G first.
    pub records: Vec<RunRecord>,
    pub seeds: Vec<SeedData>,
    /// Support recovery of each DP2G run on the elastic net.
    pub support: Vec<(String, u64, SupportReport)>,
}

impl ExperimentOutput {
    /// Records of required algorithms that did not converge.
    pub fn unconverged_required(&self) -> Vec<&RunRecord> {
        self.records
            .iter()
            .filter(|r| self.config.required.contains(&r.algorithm) && !r.summary.converged)
            .collect()
    }
}

/// Executes the experiment. Cells run in parallel; the output order and
/// content depend only on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let fingerprint = config.fingerprint();
    let seeds = config.seeds();
    let data: Vec<(u64, _, GroundTruth, Reference)> = seeds
        .par_iter()
        .map(|&seed| {
            let (problem, truth) = generate_dataset(&config.problem, seed).with_context(|| format!("data for seed {seed}"))?;
            let reference = centralized_oracle(&problem).with_context(|| format!("reference solution for seed {seed}"))?;
            Ok((seed, problem, truth, reference))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> =
        (0..data.len()).flat_map(|d| (0..config.topologies.len()).map(move |t| (d, t))).collect();
    let per_cell: Vec<Vec<RunRecord>> = cells
        .par_iter()
        .map(|&(d, t)| {
            let (seed, problem, _, reference) = &data[d];
            let topology = config.topologies[t];
            let network = NetworkModel::build(topology, problem.agents(), *seed)
                .with_context(|| format!("topology {} for seed {seed}", topology.label()))?;
            run_cell(config, problem, &network, reference, *seed)
                .with_context(|| format!("{} on {} with seed {seed}", problem.kind().label(), network.label))
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<RunRecord> = per_cell.into_iter().flatten().collect();
    for r in &mut records {
        r.fingerprint = fingerprint.clone();
    }
    let support = if config.problem.kind == ProblemKind::ElasticNet {
        records
            .iter()
            .filter(|r| r.algorithm == Algorithm::Dp2g)
            .map(|r| {
                let truth = &data.iter().find(|d| d.0 == r.seed).expect("seed present").2;
                (r.topology.clone(), r.seed, support_recovery_report(&r.final_average(), truth, SUPPORT_THRESHOLD))
            })
            .collect()
    } else {
        Vec::new()
    };
    let seeds = data.into_iter().map(|(seed, _, truth, reference)| SeedData { seed, truth, reference }).collect();
    Ok(ExperimentOutput { config: config.clone(), fingerprint, records, seeds, support })
}

fn run_cell(
    config: &ExperimentConfig,
    problem: &consensus_core::objectives::Problem,
    network: &NetworkModel,
    reference: &Reference,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    let mut targets = config.targets.map(|t| Targets {
        consensus_violation: t.consensus_violation,
        optimality_residual: t.optimality_residual,
    });
    if config.algorithms.contains(&Algorithm::Dp2g) {
        let record = dp2g::run(problem, network, &config.dp2g_config(), reference, seed)?;
        let last = record.final_sample().ok_or_else(|| anyhow!("DP2G produced no samples"))?;
        // Baselines must match DP2G's final accuracy.
        targets = Some(Targets {
            consensus_violation: last.consensus_violation,
            optimality_residual: last.optimality_residual,
        });
        log::info!(
            "{} {} seed {seed}: dp2g {} rounds, converged {}",
            problem.kind().label(),
            network.label,
            record.summary.total_rounds,
            record.summary.converged
        );
        records.push(record);
    }
    for &algorithm in config.algorithms.iter().filter(|a| **a != Algorithm::Dp2g) {
        let kind = BaselineKind::from_algorithm(algorithm).expect("non-DP2G algorithms are baselines");
        let baseline = BaselineConfig {
            algorithm: kind,
            alpha0: config.baselines.alpha(algorithm),
            round_cap: config.round_cap,
            comm_sigma: config.comm_sigma,
            force_nonsmooth: config.baselines.force_nonsmooth,
        };
        let targets = targets.expect("validated: targets exist whenever baselines run");
        records.push(run_baseline(&baseline, problem, network, reference, targets, seed)?);
    }
    Ok(records)
}
