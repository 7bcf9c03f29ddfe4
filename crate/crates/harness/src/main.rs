use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use consensus_harness::report::{load_records, rounds_table, summarize};
use consensus_harness::{output, plots, run_experiment, suites, ExperimentConfig};

#[derive(Parser)]
#[command(version, about = "Run decentralized consensus optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a built-in suite: table1, table2 or elastic-net.
    Bench {
        suite: String,
        /// Number of consecutive seeds to run.
        #[arg(long)]
        repeat: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rebuild summary files from saved run records.
    Report {
        /// An output directory of a previous run (or its `records` folder).
        dir: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Standard deviation of message noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Render SVG figures in addition to their data files.
    #[arg(long)]
    plots: bool,
}

fn execute(mut config: ExperimentConfig, o: Overrides) -> Result<ExitCode> {
    if let Some(dir) = o.output_dir {
        config.output_dir = dir;
    }
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(noise) = o.noise {
        config.comm_sigma = noise;
    }
    config.validate()?;
    let out = run_experiment(&config)?;
    let dir = &config.output_dir;
    output::persist(&out, dir)?;
    plots::emit_plots(&out, dir, o.plots)?;
    println!("{}", rounds_table(&summarize(&out.records)));
    for (topology, seed, s) in &out.support {
        println!(
            "support on {topology} (seed {seed}): precision {:.3}, recall {:.3}, l2 error {:.3e}",
            s.precision, s.recall, s.l2_error
        );
    }
    println!("results written to {}", dir.display());
    let failed = out.unconverged_required();
    if failed.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for r in failed {
        eprintln!(
            "required run did not converge: {} on {} (seed {}), {} rounds",
            r.algorithm.label(),
            r.topology,
            r.seed,
            r.summary.total_rounds
        );
    }
    Ok(ExitCode::from(2))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run { config, overrides } => ExperimentConfig::load(&config).and_then(|c| execute(c, overrides)),
        Command::Bench { suite, repeat, overrides } => suites::suite(&suite).and_then(|mut c| {
            if let Some(r) = repeat {
                c.repeat = r;
            }
            execute(c, overrides)
        }),
        Command::Report { dir } => {
            let records_dir = if dir.join("records").is_dir() { dir.join("records") } else { dir };
            load_records(&records_dir).map(|records| {
                println!("{}", rounds_table(&summarize(&records)));
                ExitCode::SUCCESS
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
