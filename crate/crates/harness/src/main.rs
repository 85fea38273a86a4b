//! Command-line experiment runner.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cmax_harness::config::ExperimentConfig;
use cmax_harness::runner::{instances_json, records_json, run_batch, timings_csv};
use cmax_harness::stats::{summarize, write_summary_csv, SummaryRow};
use cmax_harness::suites;
use cmax_harness::sweep::{sweep, sweep_chart, write_sweep_csv, SweepParameter};
use cmax_harness::tables::{icy_table, pushing_table};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "cmax",
    about = "Planning and execution with inaccurate models: experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config: a batch of seeded trials.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count from the config.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = all cores). Results do not depend on this.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the bound and invariant suites; nonzero exit on any failure.
    Suite {
        /// Run a single suite by name.
        #[arg(long)]
        only: Option<String>,
    },
    /// Sweep the kernel length scale or the sphere radius.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        parameter: String,
        /// Comma-separated grid; defaults to the documented grid.
        #[arg(long)]
        values: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Reproduce the icy-gridworld or pushing comparison table.
    Table {
        #[arg(long)]
        which: String,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seeds,
            out,
            jobs,
            format,
        } => run_command(&config, seeds, &out, jobs, format),
        Command::Suite { only } => suite_command(only.as_deref()),
        Command::Sweep {
            config,
            parameter,
            values,
            out,
            jobs,
        } => sweep_command(&config, &parameter, values.as_deref(), &out, jobs),
        Command::Table {
            which,
            seeds,
            out,
            jobs,
            format,
        } => table_command(&which, seeds, &out, jobs, format),
    }
}

fn run_command(
    config: &Path,
    seeds: Option<usize>,
    out: &Path,
    jobs: usize,
    format: Format,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(n) = seeds {
        cfg.experiment.trials = n;
    }
    let records = run_batch(&cfg, jobs)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("records.json"), records_json(&records))?;
    fs::write(out.join("timings.csv"), timings_csv(&records))?;
    fs::write(
        out.join("instances.json"),
        instances_json(
            &cfg.environment,
            cfg.experiment.base_seed,
            cfg.experiment.trials,
        )?,
    )?;
    let summary = summarize(
        cfg.experiment.algorithm.name(),
        &cfg.experiment.name,
        &records,
    );
    write_summary(&[summary.clone()], out, format)?;
    println!(
        "{}: {} trials, success {:.0}%, mean steps {}",
        cfg.experiment.name,
        summary.n,
        summary.success_rate * 100.0,
        summary
            .mean_steps
            .map(|m| format!("{m:.1}"))
            .unwrap_or_else(|| "-".into())
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn write_summary(rows: &[SummaryRow], out: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let file = fs::File::create(out.join("summary.csv"))?;
            write_summary_csv(rows, file)?;
        }
        Format::Json => {
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(rows)?)?;
        }
    }
    Ok(())
}

fn suite_command(only: Option<&str>) -> Result<()> {
    let outcomes = match only {
        None => suites::run_all(),
        Some(name) => vec![match name {
            "theorem1-bounds" => suites::theorem1_bounds(),
            "theorem2-bounds" => suites::theorem2_bounds(),
            "search-oracle-equivalence" => suites::search_oracle_equivalence(),
            "icy-table-orderings" => suites::icy_table_orderings(50),
            "pushing-surrogate" => suites::pushing_surrogate(20),
            "pickplace-scenario" => suites::pickplace_scenario(),
            "arm-lattice" => suites::arm_lattice(10),
            "invariant-battery" => suites::invariant_battery(),
            other => bail!("unknown suite {other}"),
        }],
    };
    let mut failed = false;
    for outcome in &outcomes {
        println!("{outcome}");
        failed |= !outcome.passed;
    }
    if failed {
        bail!("suite failures");
    }
    Ok(())
}

fn sweep_command(
    config: &Path,
    parameter: &str,
    values: Option<&str>,
    out: &Path,
    jobs: usize,
) -> Result<()> {
    let cfg = ExperimentConfig::from_path(config)?;
    let parameter = match parameter {
        "gamma" => SweepParameter::Gamma,
        "delta" => SweepParameter::Delta,
        other => bail!("unknown sweep parameter {other} (expected gamma or delta)"),
    };
    let grid: Vec<f64> = match values {
        Some(text) => text
            .split(',')
            .map(|v| v.trim().parse::<f64>().context("parsing sweep value"))
            .collect::<Result<_>>()?,
        None => parameter.default_grid(),
    };
    let rows = sweep(&cfg, parameter, &grid, jobs)?;
    fs::create_dir_all(out)?;
    let name = format!("sweep_{parameter}");
    let file = fs::File::create(out.join(format!("{name}.csv")))?;
    write_sweep_csv(&rows, file)?;
    fs::write(out.join(format!("{name}.svg")), sweep_chart(parameter, &rows))?;
    for row in &rows {
        println!(
            "{parameter} = {:<8} success {:.0}% mean steps {}",
            row.value,
            row.success_rate * 100.0,
            row.mean_steps
                .map(|m| format!("{m:.1}"))
                .unwrap_or_else(|| "-".into())
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn table_command(
    which: &str,
    seeds: Option<usize>,
    out: &Path,
    jobs: usize,
    format: Format,
) -> Result<()> {
    let rows = match which {
        "icy" => icy_table(seeds.unwrap_or(50), jobs)?,
        "pushing" => pushing_table(seeds.unwrap_or(20), jobs)?,
        other => bail!("unknown table {other} (expected icy or pushing)"),
    };
    fs::create_dir_all(out)?;
    write_summary(&rows, out, format)?;
    for row in &rows {
        println!(
            "{:<14} {:<18} n={} success {:.0}% steps {}{}",
            row.algorithm,
            row.condition,
            row.n,
            row.success_rate * 100.0,
            row.mean_steps
                .map(|m| format!("{m:.1}"))
                .unwrap_or_else(|| "-".into()),
            row.stderr_steps
                .map(|s| format!(" ± {s:.1}"))
                .unwrap_or_default()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
