//! Std companion of `blockprune-core`: byte decoding, configuration, JSONL
//! records, remote scorers with record/replay, the batch pipeline, URL
//! fetching and corpus statistics.

pub mod audit;
pub mod cassette;
pub mod config;
pub mod dump;
pub mod embed;
pub mod encoding;
pub mod fetch;
mod http;
pub mod pipeline;
pub mod records;
pub mod remote;
pub mod stats;
#[cfg(test)]
pub(crate) mod testing;

pub use config::{ConfigError, PruneConfig};
pub use pipeline::{run_pipeline, Backends, Mode, RecordOutput};
pub use records::{QueryRecord, RecordResult};
pub use stats::{report_stats, Summary};
