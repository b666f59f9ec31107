//! Command-line pipeline over trade files: configuration, streaming
//! evaluation of the execution-flow indicators and plot-data extraction.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 data.

pub mod config;
pub mod error;
pub mod input;
pub mod pipeline;
pub mod plot;
pub mod run;

pub use config::{parse_config, ColumnSpec, Group, RegressionPolicy, RunConfig, Thresholds};
pub use error::CliError;
pub use pipeline::{columns, Pipeline, Row};
pub use plot::{emit_plot_data, emit_plot_file, Layout, PlotSpec, Transform};
pub use run::{run_stream, run_with, RunSummary};
