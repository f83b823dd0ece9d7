//! Files, command line and HTTP service around `spamsift-core`.

pub mod cli;
pub mod formats;
pub mod ingest;
pub mod pipeline;
pub mod service;
