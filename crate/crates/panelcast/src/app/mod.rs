//! Application layer: CSV ingestion, spatial regressors, the rolling
//! forecast harness, configuration, output and the command-line driver.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod output;
pub mod rolling;
pub mod spatial;

pub use cli::cli_dispatch;
pub use csv_io::{ingest_csv, CsvSchema};
pub use rolling::{run_rolling, RollingConfig, RollingOutput};
pub use spatial::{build_spatial_regressors, SpatialSpec};
