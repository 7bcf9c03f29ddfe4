//! Files written for an experiment.
//!
//! ```text
//! <dir>/config.toml                resolved configuration
//! <dir>/summary.csv                algorithm, topology, seed, rounds, converged, max_consensus_rounds
//! <dir>/table.md                   rounds by algorithm and topology
//! <dir>/support.csv                elastic net only: support recovery per DP2G run
//! <dir>/metrics/<run>.csv          one row per recorded round, METRICS_HEADER columns
//! <dir>/records/<run>.json         full RunRecord including final states
//! <dir>/experiment.json            ground truth and reference solution per seed
//! ```
//!
//! Floats are written in shortest round-trip form, so every value parses
//! back to the identical `f64`. Wall-clock times only appear in the JSON
//! records; the CSV files are a pure function of the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use consensus_core::record::RunRecord;
use serde::Serialize;

use crate::experiment::ExperimentOutput;
use crate::report::{rounds_table, summarize};

pub const METRICS_HEADER: [&str; 7] = [
    "round",
    "objective_residual",
    "consensus_violation",
    "optimality_residual",
    "penalty",
    "rho",
    "stationarity_bound",
];

pub const SUMMARY_HEADER: [&str; 6] = ["algorithm", "topology", "seed", "rounds", "converged", "max_consensus_rounds"];

#[derive(Serialize)]
struct SummaryRow<'a> {
    algorithm: &'a str,
    topology: &'a str,
    seed: u64,
    rounds: usize,
    converged: bool,
    max_consensus_rounds: usize,
}

/// File stem shared by a run's metrics and record files.
pub fn run_stem(r: &RunRecord) -> String {
    format!("{}_{}_{}_seed{}", r.problem.label(), r.topology, r.algorithm.label(), r.seed)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

/// Writes one metrics file per run plus `summary.csv`; returns the paths
/// written.
pub fn emit_csv(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let metrics_dir = dir.join("metrics");
    fs::create_dir_all(&metrics_dir).with_context(|| format!("creating {}", metrics_dir.display()))?;
    let mut written = Vec::new();
    for r in records {
        let path = metrics_dir.join(format!("{}.csv", run_stem(r)));
        let mut w = writer(&path)?;
        w.write_record(METRICS_HEADER)?;
        for s in &r.samples {
            w.serialize(s)?;
        }
        w.flush()?;
        written.push(path);
    }
    let path = dir.join("summary.csv");
    let mut w = writer(&path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in records {
        w.serialize(SummaryRow {
            algorithm: r.algorithm.label(),
            topology: &r.topology,
            seed: r.seed,
            rounds: r.summary.total_rounds,
            converged: r.summary.converged,
            max_consensus_rounds: r.summary.max_consensus_rounds,
        })?;
    }
    w.flush()?;
    written.push(path);
    Ok(written)
}

/// Writes everything listed in the module docs except plots.
pub fn persist(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), output.config.to_toml())?;
    emit_csv(&output.records, dir)?;
    fs::write(dir.join("table.md"), rounds_table(&summarize(&output.records)))?;

    if !output.support.is_empty() {
        let mut w = writer(&dir.join("support.csv"))?;
        w.write_record(["topology", "seed", "precision", "recall", "l2_error", "predicted_nonzeros"])?;
        for (topology, seed, s) in &output.support {
            w.serialize((topology, seed, s.precision, s.recall, s.l2_error, s.predicted.len()))?;
        }
        w.flush()?;
    }

    let records_dir = dir.join("records");
    fs::create_dir_all(&records_dir)?;
    for r in &output.records {
        let path = records_dir.join(format!("{}.json", run_stem(r)));
        fs::write(&path, serde_json::to_string(r)?).with_context(|| format!("writing {}", path.display()))?;
    }
    #[derive(Serialize)]
    struct Meta<'a> {
        fingerprint: &'a str,
        seeds: &'a [crate::experiment::SeedData],
        support: &'a [(String, u64, crate::report::SupportReport)],
    }
    let meta = Meta { fingerprint: &output.fingerprint, seeds: &output.seeds, support: &output.support };
    fs::write(dir.join("experiment.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
