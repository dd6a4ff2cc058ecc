//! File formats, dataset ingestion and the `hgtok` command-line tool built
//! on `hgtok-core`.

pub mod binary;
pub mod cli;
pub mod config;
pub mod error;
pub mod hgjl;
pub mod ingest;
pub mod records;
pub mod workflow;

pub use error::{Error, Result};
