//! Experiment harness for shuffled two-channel sparse signal recovery:
//! configuration, metrics, the Monte-Carlo runner, trace ingestion and the
//! deterministic CSV writers behind the `sssr` command-line tool.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod presets;
pub mod stats;
