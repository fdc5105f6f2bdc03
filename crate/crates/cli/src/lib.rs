//! Configuration-driven pipelines over the `lgvortex-core` toolkit.

pub mod config;
pub mod pipeline;

pub use config::{expand_pipeline, parse_config, ConfigError, RunConfig, Stage};
pub use pipeline::{emit_plot_data, run, Check, PlotData, RunError, RunManifest};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
}
