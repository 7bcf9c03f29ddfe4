//! Built-in benchmark suites.

use std::path::PathBuf;

use anyhow::{bail, Result};
use consensus_core::network::TopologyKind;
use consensus_core::objectives::{DataSpec, ProblemKind};
use consensus_core::record::Algorithm;

use crate::config::{BaselineSection, Dp2gSection, ExperimentConfig};

pub const SUITES: [&str; 3] = ["table1", "table2", "elastic-net"];

pub const RING: TopologyKind = TopologyKind::Ring;
pub const GRID: TopologyKind = TopologyKind::Grid { rows: 4, cols: 5 };
pub const RANDOM_GEOMETRIC: TopologyKind = TopologyKind::RandomGeometric { radius: 0.35 };

/// Every method on the three 20-agent graphs.
fn comparison(name: &str, kind: ProblemKind) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: 1,
        repeat: 1,
        algorithms: vec![Algorithm::Dp2g, Algorithm::Extra, Algorithm::Nids, Algorithm::DgdFixed, Algorithm::DgdDiminishing],
        required: vec![Algorithm::Dp2g],
        comm_sigma: 0.0,
        round_cap: 5000,
        output_dir: PathBuf::from("results").join(name),
        problem: DataSpec::benchmark(kind),
        topologies: vec![RING, GRID, RANDOM_GEOMETRIC],
        dp2g: Dp2gSection::default(),
        baselines: BaselineSection::default(),
        targets: None,
    }
}

/// Configuration of a named suite.
pub fn suite(name: &str) -> Result<ExperimentConfig> {
    Ok(match name {
        "table1" => comparison("table1", ProblemKind::Ridge),
        "table2" => comparison("table2", ProblemKind::Logistic),
        "elastic-net" => ExperimentConfig {
            algorithms: vec![Algorithm::Dp2g],
            topologies: vec![RANDOM_GEOMETRIC],
            ..comparison("elastic-net", ProblemKind::ElasticNet)
        },
        other => bail!("unknown suite `{other}`; available: {}", SUITES.join(", ")),
    })
}
