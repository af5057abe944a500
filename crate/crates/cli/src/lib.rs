//! Config-driven runner for the spectral-transport experiment suites.
//!
//! [`config`] parses and validates experiment files, [`runner`] dispatches
//! them to the library, and [`report`] renders the results.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{
    parse_config, parse_config_str, ConfigError, ExperimentConfig, ExperimentKind, Format,
};
pub use report::{emit_report, ExperimentReport};
pub use runner::run_experiment;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SPECTRAL_TRANSPORT_OUT_DIR";

pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const RUNTIME_ERROR: i32 = 3;
}
