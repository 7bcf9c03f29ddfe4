//! Dataset export and import.
//!
//! Layout of an exported directory:
//!
//! ```text
//! manifest.json     kind, agents, samples, dimension, seed, regularizers, scale
//! truth.csv         one line: x_true entries
//! shard_<i>.csv     one line per sample: b, a_1, ..., a_m
//! ```
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! reload reproduces every value bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GroundTruth, Objective, Problem};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub objective: Objective,
    pub agents: usize,
    pub samples_per_agent: Vec<usize>,
    pub dimension: usize,
    pub seed: u64,
    pub scale: f64,
    pub support: Vec<usize>,
    pub noise_sigma: f64,
}

pub fn export_dataset(problem: &Problem, truth: &GroundTruth, seed: u64, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = DatasetManifest {
        objective: problem.objective(),
        agents: problem.agents(),
        samples_per_agent: (0..problem.agents()).map(|i| problem.shard(i).samples()).collect(),
        dimension: problem.dim(),
        seed,
        scale: problem.scale(),
        support: truth.support.clone(),
        noise_sigma: truth.noise_sigma,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text)?;
    fs::write(dir.join("truth.csv"), join(truth.x_true.iter().copied()) + "\n")?;
    for i in 0..problem.agents() {
        let shard = problem.shard(i);
        let mut out = BufWriter::new(fs::File::create(dir.join(format!("shard_{i}.csv")))?);
        for r in 0..shard.samples() {
            let features = shard.features().row(r);
            let row = std::iter::once(shard.responses()[r]).chain(features.iter().copied());
            writeln!(out, "{}", join(row))?;
        }
        out.flush()?;
    }
    Ok(())
}

pub fn import_dataset(dir: &Path) -> Result<(Problem, GroundTruth, DatasetManifest)> {
    let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let truth_line = fs::read_to_string(dir.join("truth.csv"))?;
    let x_true = parse_row(truth_line.trim(), 0)?;
    if x_true.len() != manifest.dimension {
        return Err(Error::Format(format!("truth has {} entries, manifest says {}", x_true.len(), manifest.dimension)));
    }
    let m = manifest.dimension;
    let mut shards = Vec::with_capacity(manifest.agents);
    for i in 0..manifest.agents {
        let file = fs::File::open(dir.join(format!("shard_{i}.csv")))?;
        let mut b = Vec::new();
        let mut a = Vec::new();
        for (line_no, line) in BufReader::new(file).lines().enumerate() {
            let row = parse_row(&line?, line_no + 1)?;
            if row.len() != m + 1 {
                return Err(Error::Format(format!("shard_{i}.csv line {}: expected {} fields, got {}", line_no + 1, m + 1, row.len())));
            }
            b.push(row[0]);
            a.extend_from_slice(&row[1..]);
        }
        if b.len() != manifest.samples_per_agent[i] {
            return Err(Error::Format(format!("shard_{i}.csv has {} samples, manifest says {}", b.len(), manifest.samples_per_agent[i])));
        }
        shards.push((DMatrix::from_row_slice(b.len(), m, &a), DVector::from_vec(b)));
    }
    let problem = Problem::new(manifest.objective, shards)?.with_scale(manifest.scale);
    let truth = GroundTruth { x_true, support: manifest.support.clone(), noise_sigma: manifest.noise_sigma };
    Ok((problem, truth, manifest))
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {line_no}: {e}"))))
        .collect()
}
