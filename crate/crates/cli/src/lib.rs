//! Library surface of the scenario runner; the binary in `main.rs` is a
//! thin argument-parsing wrapper around these modules.

pub mod config;
pub mod csvfmt;
pub mod error;
pub mod runner;
pub mod stats;
