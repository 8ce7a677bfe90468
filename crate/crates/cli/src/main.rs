//! `privrob run --config path [--seed N] [--out dir] [--suite name] [--trials N]`
//! `privrob emit-plots --report path [--out file]`
//!
//! Exit status: 0 when every asserted check holds, 1 when one fails, 2 on a
//! config or I/O error. `PRIVROB_OUT_ROOT` prefixes relative output paths.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use privrob_core::suites::{self, emit_plot_data, ExperimentConfig, RunReport, SuiteName};

const OUT_ROOT_VAR: &str = "PRIVROB_OUT_ROOT";
const DEFAULT_OUT: &str = "privrob-out";

#[derive(Parser)]
#[command(name = "privrob", version, about = "Bayesian privacy and robustness verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `suite`.
        #[arg(long)]
        suite: Option<String>,
        /// Overrides `trials`.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Turn a report into long-format (series, x, y) CSV.
    EmitPlots {
        #[arg(long)]
        report: PathBuf,
        /// Defaults to `plot_data.csv` next to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(requested: Option<PathBuf>, root: Option<PathBuf>) -> PathBuf {
    let dir = requested.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match root {
        Some(r) if dir.is_relative() => r.join(dir),
        _ => dir,
    }
}

fn out_root() -> Option<PathBuf> {
    std::env::var_os(OUT_ROOT_VAR).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, suite: Option<String>, trials: Option<u64>) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = suite {
        cfg.suite = s.parse::<SuiteName>()?;
    }
    if trials.is_some() {
        cfg.trials = trials;
    }
    cfg.validate()?;
    let dir = output_dir(out.or_else(|| cfg.out.clone()), out_root());

    let output = suites::run(&cfg)?;
    output.write(&dir).with_context(|| format!("writing outputs to {}", dir.display()))?;
    std::fs::write(dir.join("config.json"), cfg.to_json()).with_context(|| format!("writing config to {}", dir.display()))?;

    let report = &output.report;
    print!("{}", report.summary_csv());
    for c in report.failed_checks() {
        eprintln!("FAILED {} lhs={} rhs={} slack={} instance={}", c.name, c.lhs, c.rhs, c.slack, c.instance_digest);
    }
    println!(
        "{} checks, {} skipped, {} in {:.2}s; outputs in {}",
        report.checks.len(),
        report.skipped.len(),
        if report.passed { "all asserted checks hold" } else { "asserted check failures" },
        report.wall_time_s,
        dir.display()
    );
    Ok(report.passed)
}

fn emit_plots(report: &Path, out: Option<PathBuf>) -> Result<bool> {
    let r = RunReport::load(report).with_context(|| format!("reading report {}", report.display()))?;
    let target = out.unwrap_or_else(|| report.with_file_name("plot_data.csv"));
    std::fs::write(&target, emit_plot_data(&r)).with_context(|| format!("writing {}", target.display()))?;
    println!("{}", target.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, suite, trials } => run(&config, seed, out, suite, trials),
        Command::EmitPlots { report, out } => emit_plots(&report, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
