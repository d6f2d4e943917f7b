//! Experiment harness: configuration files, the benchmark suites, β
//! tuning, and CSV output.

mod config;
mod record;
mod suite;

pub use config::{ExperimentConfig, GridValue, RecordMode, Suite};
pub use record::{
    emit_csv, median, parse_csv, read_csv, summarize, write_csv, write_summary_csv, BenchRecord, SummaryRow,
    CSV_HEADER,
};
pub use suite::{coarse_betas, fine_betas, reported_snapshot, run_suite, tune_beta, BetaTuning};
