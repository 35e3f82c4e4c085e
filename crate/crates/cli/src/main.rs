//! `explore`: batch exploration experiments, oracle suites and map replays.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use explore_core::experiment::{parse_override, replay_snapshot, run_experiment, ExperimentSpec};
use explore_core::oracle::run_suite;

#[derive(Parser)]
#[command(
    name = "explore",
    version,
    about = "Frontier exploration experiments on occupancy grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (pose, combination) of an experiment file.
    Run {
        /// Flat `key = value` file; `-` or an empty file gives the demo.
        spec: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override one key, e.g. `--set mu=0.1`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a brute-force oracle suite: erosion, distance, dijkstra,
    /// visibility, frontier, raycast or all.
    Oracle {
        suite: String,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Replay a run and write its map at a mapping percentage.
    Snapshot { run_dir: PathBuf, pct: f64 },
}

fn run(spec_path: PathBuf, jobs: usize, overrides: Vec<String>, out: Option<PathBuf>) -> Result<ExitCode> {
    let (text, base) = if spec_path.as_os_str() == "-" {
        (String::new(), PathBuf::from("."))
    } else {
        let text = std::fs::read_to_string(&spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
        let base = spec_path.parent().map(PathBuf::from).unwrap_or_default();
        (text, base)
    };
    let mut pairs = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = out {
        pairs.push(("out_dir".into(), out.display().to_string()));
    }
    let spec = ExperimentSpec::parse(&text, &pairs, &base).context("invalid experiment configuration")?;
    let n = spec.runs().len();
    eprintln!("running {n} runs on {jobs} worker(s) into {}", spec.out_dir.display());
    let output = run_experiment(&spec, jobs)?;
    for r in &output.runs {
        println!(
            "{:<40} {:<16} {:>10.2} m {:>8.1} s {:>7.2} %",
            r.run.dir_name(),
            r.record.outcome.as_str(),
            r.record.total_distance(),
            r.record.total_time(),
            100.0 * r.record.final_mapping_pct()
        );
        for w in &r.record.warnings {
            eprintln!("warning: {}: {w}", r.run.dir_name());
        }
    }
    println!("summary: {}", output.summary_path.display());
    let violations = output.safety_violations();
    if violations > 0 {
        eprintln!("{violations} run(s) ended in SAFETY_VIOLATION");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(suite: &str, instances: usize, seed: u64) -> Result<ExitCode> {
    if instances == 0 {
        bail!("--instances must be positive");
    }
    let reports = run_suite(suite, instances, seed)?;
    let mut ok = true;
    for r in &reports {
        println!("{r}");
        for f in &r.failures {
            println!("  {f}");
        }
        ok &= r.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            spec,
            jobs,
            overrides,
            out,
        } => run(spec, jobs, overrides, out),
        Command::Oracle { suite, instances, seed } => oracle(&suite, instances, seed),
        Command::Snapshot { run_dir, pct } => {
            let path = replay_snapshot(&run_dir, pct)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
