//! Experiment configuration, sweep driver, reports and overhead arithmetic.

mod compare;
mod config;
mod overhead;
mod run;

pub use compare::{compare_report, read_results, CompareOptions, CompareReport, TrendFailure};
pub use config::{Algorithm, ExperimentConfig, PrecoderKind};
pub use overhead::{compute_overhead, OverheadReport, OverheadSpec};
pub use run::{
    run_experiment, run_trial, summarize, write_rows, ExperimentOutput, GroupSummary, ResultRow, Summary,
    RESULT_COLUMNS,
};
