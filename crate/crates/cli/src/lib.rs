//! Command-line front end for the event-triggered CSTR simulations.
//!
//! The binary resolves a [`SimConfig`](cstr_etsmc::SimConfig) from a TOML
//! file plus flags, runs one or more named scenarios and writes CSV, SVG and
//! metrics artifacts together with a digest manifest.

pub mod config;
pub mod plot;
pub mod scenario;

pub use config::{parse_config, ConfigError, ConfigFile};
pub use plot::{emit_plot, Plot, PlotError, PlotStyle, Series};
pub use scenario::{run_scenario, verify_manifest, RunManifest, ScenarioError, ScenarioName};
