//! Monte-Carlo experiment runner. Every trial owns an RNG stream derived
//! from (seed, cell, trial), so results are bit-reproducible and trials can
//! execute in parallel; records are collected in trial order before any
//! output is produced.

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::csvio::{csv_round_trip, SummaryRow};
use crate::ingest;
use crate::metrics;
use crate::stats;
use rand::Rng;
use rayon::prelude::*;
use sssr_core::baselines;
use sssr_core::numeric;
use sssr_core::robust::MmConfig;
use sssr_core::shuffle::TwoChannelMask;
use sssr_core::signal::{
    add_noise, build_sensing_matrix, synthesize, DiracStream, ModelKind, MultiChannelFrame,
};
use sssr_core::spectral;
use sssr_core::sssr::{self, SssrConfig};
use sssr_core::theory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trace ingestion failed: {0}")]
    Ingest(#[from] ingest::IngestError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// One trial's metrics. Missing metrics are NaN; failed solver runs are
/// recorded with infinite errors and zero accuracy. The `ms` column is kept
/// at zero so that output bytes stay reproducible across runs.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub shuffled: usize,
    pub wa: f64,
    pub nmse: f64,
    pub r2: f64,
    pub support_nmse: f64,
    pub iters: usize,
    pub ms: f64,
}

/// All records and summary rows of one output series (one CSV pair).
#[derive(Debug, Clone)]
pub struct SeriesOutput {
    pub name: String,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub series: Vec<SeriesOutput>,
    /// Free-form lines for stdout (estimated decay rates and the like).
    pub notes: Vec<String>,
}

struct Cell {
    snr_db: f64,
    shuffled: usize,
}

/// A synthetic two-channel instance with its ground truth.
struct Instance {
    x1: Vec<f64>,
    x2: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
    mask: TwoChannelMask,
    /// Union of the true spike locations.
    locations: Vec<f64>,
}

fn draw_locations<R: Rng>(
    rng: &mut R,
    count: usize,
    min_separation: f64,
) -> Result<Vec<f64>, String> {
    let mut locations: Vec<f64> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while locations.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(format!(
                "could not draw {count} locations at separation {min_separation}"
            ));
        }
        let t: f64 = rng.gen();
        let ok = locations.iter().all(|&u| {
            let d = (t - u).abs();
            d.min(1.0 - d) >= min_separation
        });
        if ok {
            locations.push(t);
        }
    }
    Ok(locations)
}

fn synthesize_instance(
    cfg: &ExperimentConfig,
    kind: &ModelKind,
    cell: &Cell,
    trial: usize,
    cell_index: u64,
) -> Result<Instance, String> {
    let mut rng = numeric::rng_stream(cfg.seed, &[cell_index, trial as u64]);
    let k_total = cfg.k_total();
    let locations = draw_locations(&mut rng, k_total, cfg.min_separation)?;
    // disjoint random split of the union support between the channels
    let first: Vec<usize> = rand::seq::index::sample(&mut rng, k_total, cfg.k1).into_vec();
    let mut is_first = vec![false; k_total];
    for &i in &first {
        is_first[i] = true;
    }
    let weights: Vec<f64> = (0..k_total)
        .map(|_| cfg.weight_min + (cfg.weight_max - cfg.weight_min) * rng.gen::<f64>())
        .collect();
    let mut loc1 = Vec::with_capacity(cfg.k1);
    let mut w1 = Vec::with_capacity(cfg.k1);
    let mut loc2 = Vec::with_capacity(cfg.k2);
    let mut w2 = Vec::with_capacity(cfg.k2);
    for i in 0..k_total {
        if is_first[i] {
            loc1.push(locations[i]);
            w1.push(weights[i]);
        } else {
            loc2.push(locations[i]);
            w2.push(weights[i]);
        }
    }
    let build = |loc: Vec<f64>, w: Vec<f64>| -> Result<Vec<f64>, String> {
        let stream = DiracStream::new(loc, w).map_err(|e| e.to_string())?;
        synthesize(&stream, kind, cfg.n).map_err(|e| e.to_string())
    };
    let x1 = build(loc1, w1)?;
    let x2 = build(loc2, w2)?;
    let frame = MultiChannelFrame::new(vec![x1.clone(), x2.clone()], *kind, None)
        .map_err(|e| e.to_string())?;
    let noisy = if cell.snr_db.is_finite() {
        add_noise(&frame, cell.snr_db, rng.gen())
    } else {
        frame
    };
    let mask =
        TwoChannelMask::random(cfg.n, cell.shuffled, rng.gen()).map_err(|e| e.to_string())?;
    let (y1, y2) = mask.apply_pair(noisy.channel(0), noisy.channel(1));
    Ok(Instance {
        x1,
        x2,
        y1,
        y2,
        mask,
        locations,
    })
}

fn sssr_config(cfg: &ExperimentConfig, mm_seed: u64) -> SssrConfig {
    SssrConfig {
        max_iters: cfg.max_iters,
        nonnegative: cfg.nonnegative,
        mm: MmConfig {
            seed: mm_seed,
            ..MmConfig::default()
        },
        refine_orders: Some((cfg.k1, cfg.k2)),
        ..SssrConfig::default()
    }
}

fn failure_record(trial: usize, seed: u64, cell: &Cell) -> TrialRecord {
    TrialRecord {
        trial,
        seed,
        snr_db: cell.snr_db,
        shuffled: cell.shuffled,
        wa: 0.0,
        nmse: f64::INFINITY,
        r2: f64::NAN,
        support_nmse: f64::INFINITY,
        iters: 0,
        ms: 0.0,
    }
}

fn result_record(
    trial: usize,
    seed: u64,
    cell: &Cell,
    instance: &Instance,
    result: &sssr::SssrResult,
) -> TrialRecord {
    let wa = metrics::weighted_accuracy(&result.assignment, &instance.mask, &instance.x1, &instance.x2)
        .unwrap_or(0.0);
    let nmse = metrics::nmse(
        &instance.x1,
        &instance.x2,
        &result.stacked_design(),
        &result.coefficients,
    )
    .unwrap_or(f64::INFINITY);
    let support =
        metrics::support_nmse(result.sensing.locations(), &instance.locations).unwrap_or(f64::INFINITY);
    TrialRecord {
        trial,
        seed,
        snr_db: cell.snr_db,
        shuffled: cell.shuffled,
        wa,
        nmse,
        r2: f64::NAN,
        support_nmse: support,
        iters: result.mse_trace.len(),
        ms: 0.0,
    }
}

/// Series produced per experiment kind, in output order.
fn series_names(kind: ExperimentKind) -> Vec<&'static str> {
    match kind {
        ExperimentKind::Spikes | ExperimentKind::Decaying => vec!["estimated", "known"],
        ExperimentKind::Benchmark => vec!["sssr", "hardem"],
        ExperimentKind::Refinement => vec!["noshuffle", "plain", "refined"],
        ExperimentKind::RealTraces => vec!["real"],
        ExperimentKind::TheorySweep => vec!["theory"],
    }
}

fn run_synthetic_trial(
    cfg: &ExperimentConfig,
    kind: &ModelKind,
    cell: &Cell,
    cell_index: u64,
    trial: usize,
) -> Vec<TrialRecord> {
    let trial_seed = numeric::mix_seed(cfg.seed ^ numeric::mix_seed(cell_index) ^ (trial as u64));
    let names = series_names(cfg.experiment);
    let instance = match synthesize_instance(cfg, kind, cell, trial, cell_index) {
        Ok(inst) => inst,
        Err(_) => {
            return names
                .iter()
                .map(|_| failure_record(trial, trial_seed, cell))
                .collect()
        }
    };
    let scfg = sssr_config(cfg, trial_seed);
    match cfg.experiment {
        ExperimentKind::Spikes | ExperimentKind::Decaying => {
            let estimated = sssr::run(&instance.y1, &instance.y2, cfg.k_total(), kind, &scfg)
                .map(|r| result_record(trial, trial_seed, cell, &instance, &r))
                .unwrap_or_else(|_| failure_record(trial, trial_seed, cell));
            let known = baselines::oracle_known_support(
                &instance.y1,
                &instance.y2,
                &instance.locations,
                kind,
                &scfg,
            )
            .map(|r| result_record(trial, trial_seed, cell, &instance, &r))
            .unwrap_or_else(|_| failure_record(trial, trial_seed, cell));
            vec![estimated, known]
        }
        ExperimentKind::Benchmark => {
            let estimated = sssr::run(&instance.y1, &instance.y2, cfg.k_total(), kind, &scfg)
                .map(|r| result_record(trial, trial_seed, cell, &instance, &r))
                .unwrap_or_else(|_| failure_record(trial, trial_seed, cell));
            let hardem = hard_em_record(cfg, kind, cell, trial, trial_seed, &instance);
            vec![estimated, hardem]
        }
        ExperimentKind::Refinement => {
            let noshuffle = baselines::oracle_known_assignment(
                &instance.y1,
                &instance.y2,
                &instance.mask,
                cfg.k1,
                kind,
                &scfg,
            )
            .map(|r| result_record(trial, trial_seed, cell, &instance, &r))
            .unwrap_or_else(|_| failure_record(trial, trial_seed, cell));
            let plain_result = sssr::run(&instance.y1, &instance.y2, cfg.k_total(), kind, &scfg);
            let (plain, refined) = match plain_result {
                Ok(r) => {
                    let plain = result_record(trial, trial_seed, cell, &instance, &r);
                    let refined =
                        sssr::refine(&r, &instance.y1, &instance.y2, cfg.k_total(), kind, &scfg)
                            .map(|rr| result_record(trial, trial_seed, cell, &instance, &rr))
                            .unwrap_or_else(|_| failure_record(trial, trial_seed, cell));
                    (plain, refined)
                }
                Err(_) => (
                    failure_record(trial, trial_seed, cell),
                    failure_record(trial, trial_seed, cell),
                ),
            };
            vec![noshuffle, plain, refined]
        }
        ExperimentKind::RealTraces | ExperimentKind::TheorySweep => unreachable!(),
    }
}

/// Benchmark reference: support from the channel sum as in the main method,
/// then an unstructured-permutation alternating fit on the stacked system.
fn hard_em_record(
    cfg: &ExperimentConfig,
    kind: &ModelKind,
    cell: &Cell,
    trial: usize,
    trial_seed: u64,
    instance: &Instance,
) -> TrialRecord {
    let sum: Vec<f64> = instance
        .y1
        .iter()
        .zip(&instance.y2)
        .map(|(a, b)| a + b)
        .collect();
    let scfg = SssrConfig::default();
    let attempt = (|| -> Result<TrialRecord, String> {
        let locations =
            spectral::estimate_support(&sum, cfg.k_total(), kind, scfg.cadzow_iters, scfg.cadzow_tol)
                .map_err(|e| e.to_string())?;
        let sensing = build_sensing_matrix(&locations, kind, cfg.n).map_err(|e| e.to_string())?;
        let design = sssr::block_diag_pair(sensing.matrix());
        let mut response = nalgebra::DVector::<f64>::zeros(2 * cfg.n);
        for i in 0..cfg.n {
            response[i] = instance.y1[i];
            response[cfg.n + i] = instance.y2[i];
        }
        let beta = baselines::hard_em(&design, &response, 10, 100, trial_seed ^ 0x48454d)
            .map_err(|e| e.to_string())?;
        let nmse =
            metrics::nmse(&instance.x1, &instance.x2, &design, &beta).map_err(|e| e.to_string())?;
        let support =
            metrics::support_nmse(&locations, &instance.locations).map_err(|e| e.to_string())?;
        Ok(TrialRecord {
            trial,
            seed: trial_seed,
            snr_db: cell.snr_db,
            shuffled: cell.shuffled,
            wa: f64::NAN, // undefined for unstructured permutations
            nmse,
            r2: f64::NAN,
            support_nmse: support,
            iters: 0,
            ms: 0.0,
        })
    })();
    attempt.unwrap_or_else(|_| failure_record(trial, trial_seed, cell))
}

fn real_traces_trial(
    cfg: &ExperimentConfig,
    frame: &MultiChannelFrame,
    cell: &Cell,
    cell_index: u64,
    trial: usize,
) -> (TrialRecord, Option<f64>) {
    let trial_seed = numeric::mix_seed(cfg.seed ^ numeric::mix_seed(cell_index) ^ (trial as u64));
    let mut rng = numeric::rng_stream(cfg.seed, &[cell_index, trial as u64]);
    let x1 = frame.channel(0).to_vec();
    let x2 = frame.channel(1).to_vec();
    let k = cfg.k_sigma.expect("validated");
    let attempt = (|| -> Result<(TrialRecord, f64), String> {
        let mask = TwoChannelMask::random(cfg.n, cell.shuffled, rng.gen()).map_err(|e| e.to_string())?;
        let (y1, y2) = mask.apply_pair(&x1, &x2);
        let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        let alpha =
            spectral::estimate_alpha(&sum, k, cfg.alpha_range).map_err(|e| e.to_string())?;
        let kind = ModelKind::decaying(alpha).map_err(|e| e.to_string())?;
        let scfg = sssr_config(cfg, trial_seed);
        let result = sssr::run(&y1, &y2, k, &kind, &scfg).map_err(|e| e.to_string())?;
        let wa = metrics::weighted_accuracy(&result.assignment, &mask, &x1, &x2)
            .map_err(|e| e.to_string())?;
        let r2 = metrics::r_squared(
            &x1,
            &x2,
            result.reconstructed.channel(0),
            result.reconstructed.channel(1),
        )
        .map_err(|e| e.to_string())?;
        Ok((
            TrialRecord {
                trial,
                seed: trial_seed,
                snr_db: cell.snr_db,
                shuffled: cell.shuffled,
                wa,
                nmse: f64::NAN, // no ground-truth signal for real traces
                r2,
                support_nmse: f64::NAN,
                iters: result.mse_trace.len(),
                ms: 0.0,
            },
            alpha,
        ))
    })();
    match attempt {
        Ok((record, alpha)) => (record, Some(alpha)),
        Err(_) => (failure_record(trial, trial_seed, cell), None),
    }
}

fn summarize(records: &[TrialRecord], cells: &[Cell]) -> Vec<SummaryRow> {
    let metrics_list: [(&'static str, fn(&TrialRecord) -> f64); 4] = [
        ("wa", |r| r.wa),
        ("nmse", |r| r.nmse),
        ("r2", |r| r.r2),
        ("support_nmse", |r| r.support_nmse),
    ];
    let mut rows = Vec::new();
    for cell in cells {
        let in_cell: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.snr_db.to_bits() == cell.snr_db.to_bits() && r.shuffled == cell.shuffled)
            .collect();
        for (name, getter) in metrics_list {
            let values: Vec<f64> = in_cell
                .iter()
                .map(|r| csv_round_trip(getter(r)))
                .collect();
            if let Some(percentiles) = stats::summary_percentiles(&values) {
                rows.push(SummaryRow {
                    snr_db: cell.snr_db,
                    shuffled: cell.shuffled,
                    metric: name,
                    percentiles,
                });
            }
        }
    }
    rows
}

/// Runs the configured experiment. Trials execute in parallel; the output is
/// canonical (sorted by cell and trial index) regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::TheorySweep => run_theory_sweep(cfg),
        ExperimentKind::RealTraces => run_real_traces(cfg),
        _ => run_synthetic(cfg),
    }
}

fn cells_of(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &snr in &cfg.snr_grid() {
        for &shuffled in &cfg.shuffle_grid() {
            cells.push(Cell {
                snr_db: snr,
                shuffled,
            });
        }
    }
    cells
}

fn run_synthetic(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let kind = match cfg.experiment {
        ExperimentKind::Spikes => ModelKind::Dirac,
        _ => {
            let alpha = cfg
                .decay_rate()?
                .expect("validated: decay rate present");
            ModelKind::decaying(alpha).map_err(|e| ExperimentError::Numerical(e.to_string()))?
        }
    };
    let cells = cells_of(cfg);
    let names = series_names(cfg.experiment);
    let mut per_series: Vec<Vec<TrialRecord>> = names.iter().map(|_| Vec::new()).collect();
    for (cell_index, cell) in cells.iter().enumerate() {
        let batch: Vec<Vec<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_synthetic_trial(cfg, &kind, cell, cell_index as u64, trial))
            .collect();
        for trial_records in batch {
            for (series_idx, record) in trial_records.into_iter().enumerate() {
                per_series[series_idx].push(record);
            }
        }
    }
    let series = names
        .into_iter()
        .zip(per_series)
        .map(|(name, records)| {
            let summary = summarize(&records, &cells);
            SeriesOutput {
                name: name.to_string(),
                records,
                summary,
            }
        })
        .collect();
    Ok(ExperimentOutput {
        series,
        notes: Vec::new(),
    })
}

fn run_real_traces(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let path = cfg.input.as_ref().expect("validated");
    let frame = ingest::ingest_traces(path, cfg.baseline_quantile)?;
    if frame.channel_count() != 2 {
        return Err(ExperimentError::Numerical(format!(
            "two-channel recovery needs a 2-column trace file, got {} columns",
            frame.channel_count()
        )));
    }
    if frame.sample_count() != cfg.n {
        return Err(ExperimentError::Numerical(format!(
            "config n = {} but trace file has {} samples per channel (set n to match)",
            cfg.n,
            frame.sample_count()
        )));
    }
    let cells = cells_of(cfg);
    let mut records = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    for (cell_index, cell) in cells.iter().enumerate() {
        let batch: Vec<(TrialRecord, Option<f64>)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| real_traces_trial(cfg, &frame, cell, cell_index as u64, trial))
            .collect();
        for (record, alpha) in batch {
            records.push(record);
            if let Some(a) = alpha {
                alphas.push(a);
            }
        }
    }
    let mut notes = Vec::new();
    if !alphas.is_empty() {
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = alphas[alphas.len() / 2];
        // half-life back-conversion mirrors the rate formula
        let fs = cfg.fs.unwrap_or(60.0);
        let tau = std::f64::consts::LN_2 * cfg.n as f64 / (median * fs);
        notes.push(format!(
            "alpha_est median = {:.4} (tau_est = {:.4} s at fs = {} Hz)",
            median, tau, fs
        ));
    }
    let summary = summarize(&records, &cells);
    Ok(ExperimentOutput {
        series: vec![SeriesOutput {
            name: "real".to_string(),
            records,
            summary,
        }],
        notes,
    })
}

fn run_theory_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let n = cfg.sweep_n.expect("validated");
    let k = cfg.sweep_k.expect("validated");
    let rows = theory::proposition1_sweep(n, k, cfg.seed)
        .map_err(|e| ExperimentError::Numerical(e.to_string()))?;
    let mut notes = Vec::new();
    notes.push("r,unique,expected,matches,witness_residual".to_string());
    for row in &rows {
        notes.push(format!(
            "{},{},{},{},{}",
            row.preserved,
            row.unique,
            row.expected,
            row.matches,
            row.witness_residual
                .map(crate::csvio::fmt_float)
                .unwrap_or_default(),
        ));
    }
    Ok(ExperimentOutput {
        series: Vec::new(),
        notes,
    })
}
