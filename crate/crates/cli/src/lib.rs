//! Library surface of the pipeline CLI: corpus ingestion, statistics, and
//! configuration, shared by the binary and the acceptance suite.

pub mod config;
pub mod ingest;
pub mod stats;

pub use config::PipelineConfig;
pub use ingest::{ingest_corpus, ColumnMap, IngestError, IngestOptions, IngestReport};
pub use stats::{corpus_stats, dataset_stats, render_human, StatsReport};
