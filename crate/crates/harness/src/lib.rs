//! Experiment harness for the `cmax` crate: config-driven seeded trial
//! batches, summary statistics, worst-case bound suites, parameter sweeps,
//! and CSV/JSON/SVG emission.

pub mod config;
pub mod oracles;
pub mod plot;
pub mod runner;
pub mod stats;
pub mod suites;
pub mod sweep;
pub mod tables;
