//! Flat key-value experiment configuration. Unknown keys are rejected at
//! parse time; cross-field invariants are checked by [`ExperimentConfig::validate`].

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spikes,
    Decaying,
    Benchmark,
    Refinement,
    RealTraces,
    TheorySweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Spikes => "spikes",
            ExperimentKind::Decaying => "decaying",
            ExperimentKind::Benchmark => "benchmark",
            ExperimentKind::Refinement => "refinement",
            ExperimentKind::RealTraces => "real-traces",
            ExperimentKind::TheorySweep => "theory-sweep",
        }
    }
}

fn default_n() -> usize {
    121
}
fn default_k() -> usize {
    2
}
fn default_trials() -> usize {
    100
}
fn default_seed() -> u64 {
    1234
}
fn default_min_separation() -> f64 {
    0.02
}
fn default_weight_min() -> f64 {
    0.5
}
fn default_weight_max() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    20
}
fn default_baseline_quantile() -> f64 {
    0.1
}
fn default_alpha_range() -> (f64, f64) {
    (1.0, 50.0)
}
fn default_output() -> String {
    "experiment".to_string()
}

/// Everything an experiment run needs. `snr_db` entries may be `inf` for
/// noiseless cells; exactly one of `alpha` and the `(tau_half, fs)` pair may
/// set the decay rate.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_k")]
    pub k1: usize,
    #[serde(default = "default_k")]
    pub k2: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub shuffle_counts: Vec<usize>,
    #[serde(default)]
    pub shuffle_fractions: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    #[serde(default = "default_weight_min")]
    pub weight_min: f64,
    #[serde(default = "default_weight_max")]
    pub weight_max: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tau_half: Option<f64>,
    #[serde(default)]
    pub fs: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub nonnegative: bool,
    #[serde(default = "default_output")]
    pub output: String,
    /// Input trace CSV (real-traces experiment only).
    #[serde(default)]
    pub input: Option<String>,
    #[serde(default = "default_baseline_quantile")]
    pub baseline_quantile: f64,
    /// Model order for real traces, where it cannot be derived from k1+k2.
    #[serde(default)]
    pub k_sigma: Option<usize>,
    /// Golden-section search range for the decay-rate estimate.
    #[serde(default = "default_alpha_range")]
    pub alpha_range: (f64, f64),
    #[serde(default)]
    pub sweep_n: Option<usize>,
    #[serde(default)]
    pub sweep_k: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn k_total(&self) -> usize {
        self.k1 + self.k2
    }

    /// Shuffle grid as sample counts; fractions are rounded to the nearest
    /// count.
    pub fn shuffle_grid(&self) -> Vec<usize> {
        let mut counts = self.shuffle_counts.clone();
        counts.extend(
            self.shuffle_fractions
                .iter()
                .map(|f| (f * self.n as f64).round_ties_even() as usize),
        );
        counts
    }

    /// SNR grid; an empty list means a single noiseless cell.
    pub fn snr_grid(&self) -> Vec<f64> {
        if self.snr_db.is_empty() {
            vec![f64::INFINITY]
        } else {
            self.snr_db.clone()
        }
    }

    /// Decay rate from `alpha` or from the half-life conversion.
    pub fn decay_rate(&self) -> Result<Option<f64>, ConfigError> {
        match (self.alpha, self.tau_half, self.fs) {
            (Some(a), None, None) => Ok(Some(a)),
            (None, Some(tau), Some(fs)) => {
                Ok(Some(sssr_core::signal::alpha_from_halflife(tau, fs, self.n)))
            }
            (None, None, None) => Ok(None),
            (Some(_), _, _) => Err(ConfigError::Invalid(
                "give either alpha or (tau_half, fs), not both".into(),
            )),
            _ => Err(ConfigError::Invalid(
                "tau_half and fs must be given together".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(ConfigError::Invalid("trials must be at least 1".into()));
        }
        if self.n < 2 || self.n % 2 == 0 {
            return Err(ConfigError::Invalid(format!(
                "n must be odd and at least 3, got {}",
                self.n
            )));
        }
        if self.k1 < 1 || self.k2 < 1 {
            return Err(ConfigError::Invalid("k1 and k2 must be at least 1".into()));
        }
        for &c in &self.shuffle_counts {
            if c > self.n {
                return Err(ConfigError::Invalid(format!(
                    "shuffle count {c} exceeds n = {}",
                    self.n
                )));
            }
        }
        for &f in &self.shuffle_fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(ConfigError::Invalid(format!(
                    "shuffle fraction {f} outside [0, 1]"
                )));
            }
        }
        if self.min_separation * self.k_total() as f64 >= 1.0 {
            return Err(ConfigError::Invalid(format!(
                "min_separation {} too large for {} spikes",
                self.min_separation,
                self.k_total()
            )));
        }
        if !(self.weight_min > 0.0) || self.weight_max < self.weight_min {
            return Err(ConfigError::Invalid(format!(
                "invalid weight range [{}, {}]",
                self.weight_min, self.weight_max
            )));
        }
        if self.max_iters < 1 {
            return Err(ConfigError::Invalid("max_iters must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.baseline_quantile) {
            return Err(ConfigError::Invalid(format!(
                "baseline_quantile {} outside [0, 1]",
                self.baseline_quantile
            )));
        }
        if !(self.alpha_range.0 > 0.0) || self.alpha_range.1 <= self.alpha_range.0 {
            return Err(ConfigError::Invalid(format!(
                "invalid alpha_range [{}, {}]",
                self.alpha_range.0, self.alpha_range.1
            )));
        }
        if self.experiment != ExperimentKind::RealTraces {
            // real traces estimate the decay rate; a bare `fs` is allowed
            // there for reporting
            self.decay_rate()?;
        }
        match self.experiment {
            ExperimentKind::Decaying | ExperimentKind::Benchmark | ExperimentKind::Refinement => {
                if self.decay_rate()?.is_none() {
                    return Err(ConfigError::Invalid(format!(
                        "{} experiment needs alpha or (tau_half, fs)",
                        self.experiment.name()
                    )));
                }
            }
            ExperimentKind::RealTraces => {
                if self.input.is_none() {
                    return Err(ConfigError::Invalid(
                        "real-traces experiment needs input".into(),
                    ));
                }
                if self.k_sigma.is_none() {
                    return Err(ConfigError::Invalid(
                        "real-traces experiment needs k_sigma".into(),
                    ));
                }
            }
            ExperimentKind::TheorySweep => {
                if self.sweep_n.is_none() || self.sweep_k.is_none() {
                    return Err(ConfigError::Invalid(
                        "theory-sweep needs sweep_n and sweep_k".into(),
                    ));
                }
            }
            _ => {}
        }
        if matches!(
            self.experiment,
            ExperimentKind::Spikes
                | ExperimentKind::Decaying
                | ExperimentKind::Benchmark
                | ExperimentKind::Refinement
                | ExperimentKind::RealTraces
        ) && self.shuffle_grid().is_empty()
        {
            return Err(ConfigError::Invalid(
                "need shuffle_counts or shuffle_fractions".into(),
            ));
        }
        Ok(())
    }
}
