//! Experiment harness: configuration, seeded ensemble execution, the
//! experiment recipes behind each figure, and CSV/JSON emission.

pub mod config;
pub mod ensemble;
pub mod experiments;
pub mod output;
