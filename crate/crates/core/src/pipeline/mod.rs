//! Experiment plumbing: dataset ingestion, the synthetic desk-scale corpus,
//! run configuration, stage orchestration and report emission.

pub mod config;
pub mod corpus;
pub mod dataset;
pub mod report;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use dataset::{ingest_dataset, DatasetError, LabelScheme, SplitDataset};
pub use report::{accuracy_table_csv, EvalSummary, ReportError, PAPER_FULL_SCALE};
pub use run::{run_pipeline, PipelineError};
