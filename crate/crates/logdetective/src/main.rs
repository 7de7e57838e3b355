//! `logdetective` command-line experiment harness.
//!
//! Subcommands:
//! - `run`    — execute the trial sweep of a JSON config, writing records
//!              and summary CSVs (plus bound rows when `emit_bounds` is set).
//! - `bounds` — evaluate the optimized theoretical bound curves over the
//!              config's `bounds.total_grid`.
//! - `exact`  — compute (and cache) the dense-oracle exact value only.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical-domain error,
//! 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use logdetective::experiment::{
    bounds_path, bounds_to_csv, default_oracle_cache_path, records_to_csv, run_bound_sweep,
    run_experiment, summary_path, summary_to_csv, ExperimentConfig,
};
use logdetective::{LogDetError, Result};

#[derive(Parser)]
#[command(
    name = "logdetective",
    about = "Nystrom-preconditioned stochastic Lanczos quadrature for regularized log-determinants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment sweep described by a JSON config.
    Run {
        /// Path to the JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Records CSV path (overrides the config's output_path).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the trial pool (requires the `parallel`
        /// feature; defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Emit the optimized bound curves for the config's matrix.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Bounds CSV path (defaults next to the config's output_path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the dense-oracle exact value only (uses the cache if set).
    Exact {
        #[arg(long)]
        config: PathBuf,
    },
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn records_output_path(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| config.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("logdetective_records.csv"))
}

fn cmd_run(config_path: PathBuf, out: Option<PathBuf>, threads: Option<usize>) -> Result<()> {
    let config = ExperimentConfig::from_path(&config_path)?;
    config.validate()?;
    let records_path = records_output_path(&config, out);
    let mut config = config;
    if config.oracle_cache.is_none() {
        config.oracle_cache = Some(default_oracle_cache_path(&records_path));
    }

    let output = run_in_pool(threads, || run_experiment(&config))?;

    write_file(&records_path, &records_to_csv(&output.records))?;
    let summary_file = summary_path(&records_path);
    write_file(&summary_file, &summary_to_csv(&output.summary))?;
    println!("exact trace log(A+I) = {:.17e}", output.exact);
    println!(
        "wrote {} records to {}",
        output.records.len(),
        records_path.display()
    );
    println!(
        "wrote {} summary rows to {}",
        output.summary.len(),
        summary_file.display()
    );
    if !output.bound_records.is_empty() {
        let bounds_file = bounds_path(&records_path);
        write_file(&bounds_file, &bounds_to_csv(&output.bound_records))?;
        println!(
            "wrote {} bound rows to {}",
            output.bound_records.len(),
            bounds_file.display()
        );
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn run_in_pool<T>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| LogDetError::Config(format!("cannot build a {k}-thread pool: {e}")))?;
            pool.install(job)
        }
        _ => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_in_pool<T>(threads: Option<usize>, job: impl FnOnce() -> Result<T>) -> Result<T> {
    if let Some(k) = threads {
        if k > 1 {
            eprintln!(
                "note: built without the `parallel` feature; --threads {k} runs sequentially"
            );
        }
    }
    job()
}

fn cmd_bounds(config_path: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let config = ExperimentConfig::from_path(&config_path)?;
    config.validate()?;
    let sweep = config.bounds.as_ref().ok_or_else(|| {
        LogDetError::Config("the `bounds` subcommand needs a bounds section in the config".into())
    })?;
    let cache = config
        .oracle_cache
        .clone()
        .or_else(|| config.output_path.as_deref().map(default_oracle_cache_path));
    let rows = run_bound_sweep(&config.matrix, &sweep.total_grid, sweep.m, cache.as_deref())?;
    let path = out
        .or_else(|| config.output_path.as_deref().map(bounds_path))
        .unwrap_or_else(|| PathBuf::from("logdetective_bounds.csv"));
    write_file(&path, &bounds_to_csv(&rows))?;
    println!("wrote {} bound rows to {}", rows.len(), path.display());
    Ok(())
}

fn cmd_exact(config_path: PathBuf) -> Result<()> {
    let config = ExperimentConfig::from_path(&config_path)?;
    config.validate()?;
    let op = config.matrix.build()?;
    let exact = logdetective::experiment::exact_trace_log_cached(
        &config.matrix,
        &op,
        config.oracle_cache.as_deref(),
    )?;
    println!("{exact:.17e}");
    Ok(())
}

fn exit_code_for(err: &LogDetError) -> u8 {
    match err {
        LogDetError::Config(_) => 2,
        LogDetError::NumericalDomain(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            threads,
        } => cmd_run(config, out, threads),
        Command::Bounds { config, out } => cmd_bounds(config, out),
        Command::Exact { config } => cmd_exact(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
