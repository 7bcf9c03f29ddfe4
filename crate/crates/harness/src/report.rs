//! Summaries derived from finished runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use consensus_core::objectives::GroundTruth;
use consensus_core::record::{Algorithm, RunRecord};
use serde::{Deserialize, Serialize};

/// Entries with magnitude above this count as recovered nonzeros.
pub const SUPPORT_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub predicted: Vec<usize>,
    /// `1` when nothing is predicted.
    pub precision: f64,
    /// `1` when the truth is empty.
    pub recall: f64,
    pub l2_error: f64,
}

pub fn support_recovery_report(x_final: &[f64], truth: &GroundTruth, threshold: f64) -> SupportReport {
    let predicted: Vec<usize> =
        x_final.iter().enumerate().filter(|(_, v)| v.abs() > threshold).map(|(j, _)| j).collect();
    let hits = predicted.iter().filter(|j| truth.support.contains(j)).count() as f64;
    let ratio = |den: usize| if den == 0 { 1.0 } else { hits / den as f64 };
    let l2_error = x_final.iter().zip(&truth.x_true).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    SupportReport { precision: ratio(predicted.len()), recall: ratio(truth.support.len()), predicted, l2_error }
}

/// Round counts of one (algorithm, topology) cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub topology: String,
    pub runs: usize,
    pub converged: usize,
    pub mean_rounds: f64,
    pub min_rounds: usize,
    pub max_rounds: usize,
}

impl CellSummary {
    /// Every run stopped at the cap without meeting its tolerance.
    pub fn all_capped(&self) -> bool {
        self.converged == 0
    }
}

/// Groups records by algorithm and topology, keeping first-seen topology
/// order.
pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let mut topologies: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(Algorithm, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let t = match topologies.iter().position(|t| *t == r.topology) {
            Some(t) => t,
            None => {
                topologies.push(&r.topology);
                topologies.len() - 1
            }
        };
        cells.entry((r.algorithm, t)).or_default().push(r);
    }
    let order = |a: Algorithm| Algorithm::ALL.iter().position(|x| *x == a).unwrap_or(usize::MAX);
    let mut out: Vec<CellSummary> = cells
        .into_iter()
        .map(|((algorithm, t), rs)| {
            let rounds: Vec<usize> = rs.iter().map(|r| r.summary.total_rounds).collect();
            CellSummary {
                algorithm,
                topology: topologies[t].to_string(),
                runs: rs.len(),
                converged: rs.iter().filter(|r| r.summary.converged).count(),
                mean_rounds: rounds.iter().sum::<usize>() as f64 / rounds.len() as f64,
                min_rounds: *rounds.iter().min().expect("nonempty"),
                max_rounds: *rounds.iter().max().expect("nonempty"),
            }
        })
        .collect();
    out.sort_by_key(|c| (order(c.algorithm), topologies.iter().position(|t| *t == c.topology)));
    out
}

/// Markdown table of rounds, algorithms by topology. A dagger marks cells
/// where every run hit the cap.
pub fn rounds_table(summaries: &[CellSummary]) -> String {
    let mut topologies: Vec<&str> = Vec::new();
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for s in summaries {
        if !topologies.contains(&s.topology.as_str()) {
            topologies.push(&s.topology);
        }
        if !algorithms.contains(&s.algorithm) {
            algorithms.push(s.algorithm);
        }
    }
    let mut out = String::from("| Algorithm |");
    for t in &topologies {
        let _ = write!(out, " {t} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(topologies.len()));
    out.push('\n');
    for a in algorithms {
        let _ = write!(out, "| {} |", a.display_name());
        for t in &topologies {
            let cell = summaries.iter().find(|s| s.algorithm == a && s.topology == *t);
            let text = match cell {
                None => "-".to_string(),
                Some(s) => {
                    let mark = if s.all_capped() { "†" } else { "" };
                    if s.runs == 1 {
                        format!("{}{mark}", s.min_rounds)
                    } else {
                        format!("{:.0}{mark} [{}..{}] ({}/{} conv.)", s.mean_rounds, s.min_rounds, s.max_rounds, s.converged, s.runs)
                    }
                }
            };
            let _ = write!(out, " {text} |");
        }
        out.push('\n');
    }
    out.push_str("\n† stopped at the round cap without satisfying the tolerance.\n");
    out
}

/// Loads every `*.json` run record in `dir`, sorted by file name.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}
