//! Library side of the command-line front end: configuration, chunked CSV
//! ingestion, the stream driver, snapshots and report assembly.

pub mod config;
pub mod csvio;
pub mod engine;
pub mod error;
pub mod report;
pub mod snapshot;
