//! Experiment plumbing: datasets, configs, runs, CSV logs and summaries.

pub mod config;
pub mod csvlog;
pub mod dataset;
pub mod experiment;
pub mod summary;

pub use config::{ExperimentConfig, Method};
pub use csvlog::{read_run, write_run, RunLog, HEADER};
pub use dataset::{parse_libsvm, split, split_indices, Dataset, DatasetStats};
pub use experiment::{
    build_problems, default_out_dir, execute, run_experiment, summarize_dir, ExperimentOutcome, Problems,
    OUT_DIR_ENV, SUMMARY_FILE,
};
pub use summary::{loss_at_budget, mean_std, RunResult, Summary};
