//! Command-line driver for the `clebsch-geodesic` library: JSON configs in,
//! CSV trajectories and JSON reports out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
