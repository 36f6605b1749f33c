//! Experiment orchestration for lifetime policy reuse: JSON experiment
//! configs, parallel runs over task sequences, CSV logs, and post-hoc
//! aggregation.

pub mod analysis;
pub mod config;
pub mod experiment;

pub use analysis::{aggregate, compute_metrics, load_logs, MetricsReport, WindowRow};
pub use config::{ExperimentConfig, InvalidConfig, LearnerKind};
pub use experiment::{
    run_experiment, run_sequence, sequence_csv, sequence_seed, summarise_log, ExperimentSummary,
    SequenceSummary, FINAL_BLOCKS,
};
