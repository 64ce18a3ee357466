//! Monte-Carlo experiment engine, configuration ingestion, and result
//! persistence — the reproduction harness behind the CLI.

pub mod config;
pub mod engine;

pub use config::{ConfigError, ExperimentConfig, Metric, Modulation, PrecoderSpec};
pub use engine::{
    covariance_report_text, csv_string, fmt_sig10, noise_variance, run_ber,
    run_covariance_check, run_metric, run_sumrate, run_to_csv, write_csv, CovarianceCheck,
    ResultRow, RunReport, SimError, CSV_HEADER,
};
