//! Convergence figures.
//!
//! Data files are always written under `<dir>/figures`; SVG rendering is
//! compiled in with the `plots` feature and requested at run time. A
//! rendering failure is logged and leaves the data files in place.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use consensus_core::record::RunRecord;

use crate::experiment::ExperimentOutput;
use crate::report::SUPPORT_THRESHOLD;

/// Metrics shown in a convergence figure, top to bottom.
pub const PANELS: [&str; 3] = ["objective_residual", "consensus_violation", "optimality_residual"];

/// One figure: every algorithm on one (topology, seed) cell.
pub struct Figure<'a> {
    pub stem: String,
    pub runs: Vec<&'a RunRecord>,
}

pub fn figures(records: &[RunRecord]) -> Vec<Figure<'_>> {
    let mut out: Vec<Figure<'_>> = Vec::new();
    for r in records {
        let stem = format!("{}_{}_seed{}", r.problem.label(), r.topology, r.seed);
        match out.iter_mut().find(|f| f.stem == stem) {
            Some(f) => f.runs.push(r),
            None => out.push(Figure { stem, runs: vec![r] }),
        }
    }
    out
}

fn panel_value(s: &consensus_core::diagnostics::MetricsSample, panel: usize) -> f64 {
    match panel {
        0 => s.objective_residual,
        1 => s.consensus_violation,
        _ => s.optimality_residual,
    }
}

/// Writes figure data and, if `render` is set and the feature is enabled,
/// SVG images. Returns the files written.
pub fn emit_plots(output: &ExperimentOutput, dir: &Path, render: bool) -> Result<Vec<PathBuf>> {
    let fig_dir = dir.join("figures");
    fs::create_dir_all(&fig_dir).with_context(|| format!("creating {}", fig_dir.display()))?;
    let mut written = Vec::new();
    for fig in figures(&output.records) {
        let path = fig_dir.join(format!("{}.csv", fig.stem));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["algorithm", "round", PANELS[0], PANELS[1], PANELS[2]])?;
        for r in &fig.runs {
            for s in &r.samples {
                w.serialize((r.algorithm.label(), s.round, s.objective_residual, s.consensus_violation, s.optimality_residual))?;
            }
        }
        w.flush()?;
        written.push(path);
        if render {
            let svg = fig_dir.join(format!("{}.svg", fig.stem));
            match render::convergence(&fig, &svg) {
                Ok(()) => written.push(svg),
                Err(e) => log::warn!("could not render {}: {e}; data file kept", svg.display()),
            }
        }
    }
    for (topology, seed, _) in &output.support {
        let Some(record) = output
            .records
            .iter()
            .find(|r| r.algorithm == consensus_core::record::Algorithm::Dp2g && &r.topology == topology && r.seed == *seed)
        else {
            continue;
        };
        let Some(data) = output.seeds.iter().find(|d| d.seed == *seed) else { continue };
        let x_final = record.final_average();
        let stem = format!("support_{topology}_seed{seed}");
        let path = fig_dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["index", "x_true", "x_final", "true_nonzero", "recovered"])?;
        for (j, (t, x)) in data.truth.x_true.iter().zip(&x_final).enumerate() {
            w.serialize((j, t, x, data.truth.support.contains(&j), x.abs() > SUPPORT_THRESHOLD))?;
        }
        w.flush()?;
        written.push(path);
        if render {
            let svg = fig_dir.join(format!("{stem}.svg"));
            match render::support(&data.truth.x_true, &x_final, &svg) {
                Ok(()) => written.push(svg),
                Err(e) => log::warn!("could not render {}: {e}; data file kept", svg.display()),
            }
        }
    }
    Ok(written)
}

#[cfg(feature = "plots")]
mod render {
    use std::path::Path;

    use plotters::prelude::*;

    use super::{panel_value, Figure, PANELS};

    type DynError = Box<dyn std::error::Error>;

    const FLOOR: f64 = 1e-16;

    fn colour(i: usize) -> RGBColor {
        const PALETTE: [RGBColor; 5] =
            [RGBColor(0, 114, 178), RGBColor(213, 94, 0), RGBColor(0, 158, 115), RGBColor(204, 121, 167), RGBColor(86, 180, 233)];
        PALETTE[i % PALETTE.len()]
    }

    pub fn convergence(fig: &Figure<'_>, path: &Path) -> Result<(), DynError> {
        let root = SVGBackend::new(path, (900, 1050)).into_drawing_area();
        root.fill(&WHITE)?;
        let areas = root.split_evenly((PANELS.len(), 1));
        let max_round = fig.runs.iter().flat_map(|r| r.samples.last()).map(|s| s.round).max().unwrap_or(1).max(1);
        for (panel, area) in areas.iter().enumerate() {
            let values = fig.runs.iter().flat_map(|r| r.samples.iter().map(move |s| panel_value(s, panel).max(FLOOR)));
            let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (FLOOR, 1.0) };
            let mut chart = ChartBuilder::on(area)
                .caption(format!("{} ({})", PANELS[panel].replace('_', " "), fig.stem), ("sans-serif", 18))
                .margin(10)
                .x_label_area_size(35)
                .y_label_area_size(70)
                .build_cartesian_2d(0usize..max_round, (lo..hi).log_scale())?;
            chart.configure_mesh().x_desc("communication rounds").draw()?;
            for (i, r) in fig.runs.iter().enumerate() {
                let style = colour(i);
                chart
                    .draw_series(LineSeries::new(r.samples.iter().map(|s| (s.round, panel_value(s, panel).max(FLOOR))), style))?
                    .label(r.algorithm.display_name())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
            }
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        }
        root.present()?;
        Ok(())
    }

    pub fn support(x_true: &[f64], x_final: &[f64], path: &Path) -> Result<(), DynError> {
        let root = SVGBackend::new(path, (900, 400)).into_drawing_area();
        root.fill(&WHITE)?;
        let bound = x_true.iter().chain(x_final).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3) * 1.1;
        let mut chart = ChartBuilder::on(&root)
            .caption("recovered (dots) vs true (circles) coefficients", ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(50)
            .build_cartesian_2d(0..x_true.len(), -bound..bound)?;
        chart.configure_mesh().x_desc("coordinate").draw()?;
        chart.draw_series(
            x_true.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| Circle::new((j, *v), 6, colour(1).stroke_width(2))),
        )?;
        chart.draw_series(x_final.iter().enumerate().map(|(j, v)| Circle::new((j, *v), 3, colour(0).filled())))?;
        root.present()?;
        Ok(())
    }
}

#[cfg(not(feature = "plots"))]
mod render {
    use std::path::Path;

    use super::Figure;

    type DynError = Box<dyn std::error::Error>;

    pub fn convergence(_: &Figure<'_>, _: &Path) -> Result<(), DynError> {
        Err("built without the `plots` feature".into())
    }

    pub fn support(_: &[f64], _: &[f64], _: &Path) -> Result<(), DynError> {
        Err("built without the `plots` feature".into())
    }
}
