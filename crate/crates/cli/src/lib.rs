//! Batch front end for `tsecon`: CSV ingestion, optional FRED download,
//! configuration, and the full forecasting pipeline with its artifacts.

pub mod config;
pub mod dataset;
pub mod error;
pub mod fetch;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use config::PipelineConfig;
pub use dataset::{ingest_csv, Dataset};
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, PipelineOutcome};
