//! Command-line front end for the KPS covariance test: CSV ingestion,
//! residualization on controls and instruments, reports, and the Monte Carlo
//! drivers.

pub mod commands;
pub mod error;
pub mod ingest;
pub mod report;
pub mod residualize;

pub use error::{CliError, Result};
