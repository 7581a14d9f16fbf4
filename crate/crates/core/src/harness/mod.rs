//! Experiment configuration, orchestration and statistics.

pub mod config;
pub mod experiment;
pub mod stats;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{
    load_repertoire, load_stats, run_experiment, run_replicate, sample_targets, write_outputs, ExperimentError,
    ExperimentOutput, ReplicateRun,
};
pub use stats::{
    compare, mann_whitney_u, median, percentile, recovered_capabilities, spearman, stars, ComparisonMode,
    MannWhitney, RunStats, StatsError,
};
