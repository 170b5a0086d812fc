//! `sssr`: experiment CLI for shuffled two-channel sparse signal recovery.
//!
//! Exit codes: 0 on success, 2 for configuration/input errors, 3 for
//! numerical failures.

use clap::{Args, Parser, Subcommand};
use sssr_harness::config::{ConfigError, ExperimentConfig, ExperimentKind};
use sssr_harness::csvio;
use sssr_harness::experiment::{self, ExperimentError, ExperimentOutput};
use sssr_harness::presets;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sssr", version, about = "Shuffled sparse signal recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run(RunArgs),
    /// Uniqueness sweep over all preserved-coordinate counts.
    Theory(TheoryArgs),
    /// Shuffle user-supplied traces and recover them.
    Ingest(IngestArgs),
    /// Re-run a canned study (fig4..fig7) at reduced trial counts.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config.
    #[arg(long)]
    config: String,
    /// Override the config's output prefix.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Sweep parameters as KEY=VALUE pairs, e.g. --sweep N=6 K=4.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    sweep: Vec<String>,
    #[arg(long, default_value_t = 1234)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    /// Trace CSV: one row per sample, one column per channel.
    #[arg(long)]
    input: String,
    /// Number of samples to shuffle per trial.
    #[arg(long)]
    shuffle: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Total model order (number of spikes across both channels).
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Baseline quantile subtracted per channel.
    #[arg(long, default_value_t = 0.1)]
    baseline_quantile: f64,
    /// Decay-rate search range.
    #[arg(long, default_value_t = 1.0)]
    alpha_lo: f64,
    #[arg(long, default_value_t = 50.0)]
    alpha_hi: f64,
    /// Constrain spike amplitudes to be nonnegative.
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    nonnegative: bool,
    /// Acquisition rate in Hz, used to report the estimated half-life.
    #[arg(long, default_value_t = 60.0)]
    fs: f64,
    #[arg(long, default_value = "ingest")]
    out: String,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of: fig4, fig5, fig6, fig7.
    name: String,
    /// Output directory for the CSV files.
    #[arg(long, default_value = ".")]
    out: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1234)]
    seed: u64,
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => CliError::Config(c.to_string()),
            ExperimentError::Ingest(i) => CliError::Config(i.to_string()),
            ExperimentError::Numerical(n) => CliError::Numerical(n),
        }
    }
}

impl From<csvio::CsvError> for CliError {
    fn from(e: csvio::CsvError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn write_output(
    prefix: &str,
    kind: ExperimentKind,
    output: &ExperimentOutput,
) -> Result<(), CliError> {
    if kind == ExperimentKind::TheorySweep {
        let path = PathBuf::from(format!("{prefix}_theory.csv"));
        let mut text = output.notes.join("\n");
        text.push('\n');
        csvio::write_text(&path, &text)?;
        println!("wrote {}", path.display());
    } else {
        for path in csvio::write_series(prefix, &output.series)? {
            println!("wrote {}", path.display());
        }
    }
    for note in &output.notes {
        println!("{note}");
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    let output = experiment::run_experiment(&cfg)?;
    write_output(&cfg.output.clone(), cfg.experiment, &output)
}

fn cmd_theory(args: &TheoryArgs) -> Result<(), CliError> {
    let mut n: Option<usize> = None;
    let mut k: Option<usize> = None;
    for pair in &args.sweep {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(CliError::Config(format!(
                "sweep parameter {pair:?} is not KEY=VALUE"
            )));
        };
        let parsed: usize = value
            .parse()
            .map_err(|_| CliError::Config(format!("sweep value {value:?} is not an integer")))?;
        match key.trim().to_ascii_uppercase().as_str() {
            "N" => n = Some(parsed),
            "K" => k = Some(parsed),
            other => {
                return Err(CliError::Config(format!("unknown sweep key {other:?}")));
            }
        }
    }
    let (Some(n), Some(k)) = (n, k) else {
        return Err(CliError::Config("theory sweep needs N=… and K=…".into()));
    };
    let rows = sssr_core::theory::proposition1_sweep(n, k, args.seed)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    println!("r,unique,expected,matches,witness_residual");
    let mut all_match = true;
    for row in &rows {
        all_match &= row.matches;
        println!(
            "{},{},{},{},{}",
            row.preserved,
            row.unique,
            row.expected,
            row.matches,
            row.witness_residual
                .map(csvio::fmt_float)
                .unwrap_or_default()
        );
    }
    if all_match {
        println!("verdicts match K <= max(r, N - r) for all r");
        Ok(())
    } else {
        Err(CliError::Numerical(
            "uniqueness verdicts disagree with the closed-form condition".into(),
        ))
    }
}

fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    // sample count comes from the file; recovery needs it odd
    let frame = sssr_harness::ingest::ingest_traces(&args.input, args.baseline_quantile)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let n = frame.sample_count();
    if n % 2 == 0 {
        return Err(CliError::Config(format!(
            "trace file has an even number of samples ({n}); drop one row"
        )));
    }
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::RealTraces,
        k1: (args.k / 2).max(1),
        k2: (args.k - args.k / 2).max(1),
        n,
        snr_db: vec![f64::INFINITY],
        shuffle_counts: vec![args.shuffle],
        shuffle_fractions: vec![],
        trials: args.trials,
        seed: args.seed,
        min_separation: 0.02,
        weight_min: 0.5,
        weight_max: 1.0,
        alpha: None,
        tau_half: None,
        fs: Some(args.fs),
        max_iters: 20,
        nonnegative: args.nonnegative,
        output: args.out.clone(),
        input: Some(args.input.clone()),
        baseline_quantile: args.baseline_quantile,
        k_sigma: Some(args.k),
        alpha_range: (args.alpha_lo, args.alpha_hi),
        sweep_n: None,
        sweep_k: None,
    };
    cfg.validate()?;
    let output = experiment::run_experiment(&cfg)?;
    write_output(&cfg.output, cfg.experiment, &output)
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<(), CliError> {
    let Some(preset) = presets::preset(&args.name, args.trials, args.seed) else {
        return Err(CliError::Config(format!(
            "unknown preset {:?}; expected fig4, fig5, fig6 or fig7",
            args.name
        )));
    };
    for (run_name, cfg) in &preset.runs {
        let prefix = PathBuf::from(&args.out).join(run_name);
        let output = experiment::run_experiment(cfg)?;
        write_output(&prefix.display().to_string(), cfg.experiment, &output)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Theory(args) => cmd_theory(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(message)) => {
            eprintln!("numerical failure: {message}");
            ExitCode::from(3)
        }
    }
}
